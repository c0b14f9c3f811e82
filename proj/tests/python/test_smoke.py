import numpy as np
import pytest

import dmlann


@pytest.fixture(scope="module")
def desk():
    vectors, labels = dmlann.generate_synthetic(classes=10, per_class=4, dim=32, seed=3)
    refs = dmlann.ReferenceSet(vectors, labels)
    matrix = dmlann.build_distance_matrix(refs)
    return vectors, labels, refs, matrix


def test_chi_square_reference_value():
    assert dmlann.chi_square(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert dmlann.chi_square(np.zeros(3), np.zeros(3)) == 0.0


def test_matrix_matches_pairwise_chi_square(desk):
    vectors, _, refs, matrix = desk
    m = matrix.to_numpy()
    assert m.shape == (len(refs), len(refs))
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 0.0)
    assert m[3, 7] == pytest.approx(dmlann.chi_square(vectors[3], vectors[7]), abs=1e-12)


def test_exhaustive_search_matches_brute_force(desk):
    vectors, labels, refs, matrix = desk
    model = dmlann.kmeans(refs, 3, seed=42)
    rng = np.random.default_rng(0)
    for _ in range(10):
        q = rng.random(32)
        q /= q.sum()
        exact = dmlann.search_bruteforce(q, refs)
        approx = dmlann.search_dmlann(q, refs, matrix, model, rho0=0.0, max_iterations=len(refs))
        assert approx.result_reference == exact.result_reference
        assert exact.distance_computations == len(refs)
        assert approx.terminated_by == "budget"


def test_single_cluster_equals_mlann(desk):
    vectors, _, refs, matrix = desk
    model = dmlann.kmeans(refs, 1)
    first = dmlann.global_medoid(refs)
    a = dmlann.search_dmlann(vectors[5], refs, matrix, model, rho0=0.0, max_iterations=12)
    b = dmlann.search_mlann(vectors[5], refs, matrix, first, rho0=0.0, max_iterations=12)
    assert a.candidate_order == b.candidate_order
    assert a.candidate_order[0] == (0, 0, first)


def test_weights_and_allocation():
    assert dmlann.weights_from_averages([0.4, 0.15], 100) == [1, 3]
    assert dmlann.allocate_selections([1, 3], [10, 1]) == [3, 1]
    assert dmlann.phi(0.4, 0.1) == pytest.approx(0.9)


def test_hog_on_step_edge():
    img = np.zeros((16, 16))
    img[:, 8:] = 1.0
    vec, geometry = dmlann.extract_hog(img)
    assert geometry == (16, 16, 9)
    assert vec.shape == (dmlann.hog_dimension(16, 16),)
    assert vec.sum() == pytest.approx(1.0)


def test_index_build_and_query(tmp_path, desk):
    vectors, labels, _, _ = desk
    feature_file = tmp_path / "f.csv"
    lines = [f"DMLANN-FEATURES v1,1,1,32,32,{len(labels)}"]
    for i, (label, v) in enumerate(zip(labels, vectors)):
        lines.append(",".join([label, f"synthetic/{i}"] + [repr(float(x)) for x in v]))
    feature_file.write_text("\n".join(lines) + "\n")
    dmlann.Index.build(feature_file, tmp_path / "idx", ks=[1, 3], query_count=5)
    index = dmlann.Index.load(tmp_path / "idx")
    assert sorted(index.models) == [1, 3]
    assert len(index.query_vectors) == 5
    for q, label in zip(index.query_vectors, index.query_labels):
        trace = index.query(q, algo="dmlann", k=3, rho0=0.0, max_iterations=len(index.refs))
        assert trace.result_label == index.query(q, algo="brute").result_label
        assert '"candidate_order"' in trace.to_json()
