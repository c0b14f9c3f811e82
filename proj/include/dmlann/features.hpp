#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dmlann/hog.hpp"
#include "dmlann/types.hpp"

namespace dmlann {

/// Extracts every readable image under `<dir>/<class_label>/`. Records are
/// ordered lexicographically by path regardless of `threads`.
std::vector<LabeledFeature> extract_directory(const std::filesystem::path& dir,
                                              const HogParams& params = {},
                                              unsigned threads = 1);

/// Feature file: `DMLANN-FEATURES v1,U,V,N,dim,count` then
/// `class_label,path,v1,...,vdim` rows at 17 significant digits.
void write_feature_file(const std::filesystem::path& path,
                        const std::vector<LabeledFeature>& records);
std::vector<LabeledFeature> read_feature_file(const std::filesystem::path& path);

}  // namespace dmlann
