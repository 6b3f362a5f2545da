#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ftl/family_json.hpp"
#include "ftl/ops.hpp"
#include "ftl/transform.hpp"
#include "helpers.hpp"

using namespace ftl;

namespace {

TransformFamily mnist_family() {
  TransformFamily f;
  f.dofs = {
      {"rotation", DofDomain::Circle, 0.0, 0.0, 2, 85},
      {"scale-x", DofDomain::Interval, 0.7, 1.3, 2, 85},
      {"scale-y", DofDomain::Interval, 0.7, 1.3, 2, 85},
  };
  f.feature_dim = 510;
  return f;
}

TransformFamily face_family() {
  TransformFamily f;
  f.dofs = {
      {"rotation", DofDomain::Sphere, 0.0, 0.0, 3, 1},
      {"lighting", DofDomain::Sphere, 0.0, 0.0, 3, 1},
  };
  f.feature_dim = 6;
  return f;
}

}  // namespace

TEST_CASE("rotation_2d basics") {
  Mat r0 = rotation_2d(0.0);
  CHECK(max_abs_diff(r0, Mat::identity(2)) == 0.0);

  Mat rq = rotation_2d(kPi / 2);
  CHECK(std::fabs(rq.at(0, 0)) <= 1e-12);
  CHECK(rq.at(0, 1) == Catch::Approx(-1.0).margin(1e-12));
  CHECK(rq.at(1, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(std::fabs(rq.at(1, 1)) <= 1e-12);

  CHECK_THROWS_AS(rotation_2d(std::nan("")), ValueError);
}

TEST_CASE("rotation_2d angle addition matches the matrix product") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng), b = u(rng);
    Mat lhs = rotation_2d(a + b);
    Mat rhs = matmul(rotation_2d(a), rotation_2d(b));
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("rotation_3d structure and orthogonality") {
  CHECK(max_abs_diff(rotation_3d(0.0, 0.0), Mat::identity(3)) == 0.0);

  // Pure azimuth: rotation about the third axis.
  Mat az = rotation_3d(0.7, 0.0);
  CHECK(az.at(2, 2) == 1.0);
  CHECK(az.at(0, 2) == 0.0);
  CHECK(az.at(1, 2) == 0.0);
  CHECK(az.at(2, 0) == 0.0);
  CHECK(az.at(2, 1) == 0.0);
  CHECK(az.at(0, 0) == Catch::Approx(std::cos(0.7)).margin(1e-15));
  CHECK(az.at(0, 1) == Catch::Approx(-std::sin(0.7)).margin(1e-15));

  // Pure elevation: rotation in the 1-3 plane.
  Mat el = rotation_3d(0.0, 0.4);
  CHECK(el.at(1, 1) == 1.0);
  CHECK(el.at(0, 1) == 0.0);
  CHECK(el.at(1, 0) == 0.0);
  CHECK(el.at(0, 2) == Catch::Approx(std::sin(0.4)).margin(1e-15));
  CHECK(el.at(2, 0) == Catch::Approx(-std::sin(0.4)).margin(1e-15));

  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int t = 0; t < 100; ++t) {
    Mat r = rotation_3d(u(rng), u(rng));
    CHECK(max_abs_diff(matmul(transpose(r), r), Mat::identity(3)) <= 1e-12);
    const double det =
        r.at(0, 0) * (r.at(1, 1) * r.at(2, 2) - r.at(1, 2) * r.at(2, 1)) -
        r.at(0, 1) * (r.at(1, 0) * r.at(2, 2) - r.at(1, 2) * r.at(2, 0)) +
        r.at(0, 2) * (r.at(1, 0) * r.at(2, 1) - r.at(1, 1) * r.at(2, 0));
    CHECK(det == Catch::Approx(1.0).margin(1e-12));
  }

  CHECK_THROWS_AS(rotation_3d(std::nan(""), 0.0), ValueError);
}

TEST_CASE("map_interval_to_angle endpoints, midpoint, monotonicity") {
  CHECK(map_interval_to_angle(0.7, 0.7, 1.3) == 0.0);
  CHECK(map_interval_to_angle(1.0, 0.7, 1.3) == Catch::Approx(kPi / 2).margin(1e-15));
  CHECK(map_interval_to_angle(1.3, 0.7, 1.3) == Catch::Approx(kPi).margin(1e-15));

  std::mt19937_64 rng(33);
  auto vals = testutil::random_vec(50, 0.7, 1.3, rng);
  std::sort(vals.begin(), vals.end());
  double prev = -1.0;
  for (double v : vals) {
    const double a = map_interval_to_angle(v, 0.7, 1.3);
    CHECK(a > prev);
    CHECK(a >= 0.0);
    CHECK(a <= kPi);
    prev = a;
  }

  CHECK_THROWS_AS(map_interval_to_angle(1.5, 0.7, 1.3), DomainError);
  CHECK_THROWS_AS(map_interval_to_angle(0.2, 0.7, 1.3), DomainError);
  CHECK_THROWS_AS(map_interval_to_angle(1.0, 1.3, 0.7), ValueError);
}

TEST_CASE("build_block_transform identity and preset layouts") {
  TransformFamily desk = testutil::desk_family();
  BlockOperator id = build_block_transform(desk, identity_params(desk));
  for (const Mat& b : id.blocks)
    CHECK(max_abs_diff(b, Mat::identity(b.n)) == 0.0);

  TransformFamily mnist = mnist_family();
  mnist.validate();
  BlockOperator op = build_block_transform(mnist, identity_params(mnist));
  CHECK(op.feature_dim == 510);
  REQUIRE(op.blocks.size() == 3);
  int expanded = 0;
  for (size_t d = 0; d < op.blocks.size(); ++d) {
    CHECK(op.repetitions[d] == 85);
    expanded += op.repetitions[d];
  }
  CHECK(expanded == 255);
  CHECK(mnist.signature_length() == 3 * (85 * 86) / 2);

  TransformFamily face = face_family();
  face.validate();
  TransformParams p;
  p.values["rotation"] = {0.3, -0.2};
  p.values["lighting"] = {1.1, 0.5};
  BlockOperator fop = build_block_transform(face, p);
  CHECK(fop.feature_dim == 6);
  auto dense = testutil::dense_operator(fop);
  Mat rot = rotation_3d(0.3, -0.2);
  Mat light = rotation_3d(1.1, 0.5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(dense[static_cast<size_t>(i * 6 + j)] == rot.at(i, j));
      CHECK(dense[static_cast<size_t>((3 + i) * 6 + (3 + j))] == light.at(i, j));
      CHECK(dense[static_cast<size_t>(i * 6 + 3 + j)] == 0.0);
    }

  TransformParams missing;
  missing.values["rotation"] = {0.3, -0.2};
  CHECK_THROWS_AS(build_block_transform(face, missing), ValueError);
}

TEST_CASE("apply: identity, quarter turn, and the dense oracle") {
  TransformFamily desk = testutil::desk_family();
  std::mt19937_64 rng(34);
  Tensor e = Tensor::uniform({4, desk.feature_dim}, -2.0, 2.0, rng);

  Tensor same = apply(build_block_transform(desk, identity_params(desk)), e);
  for (long i = 0; i < e.size(); ++i) CHECK(same.data()[i] == e.data()[i]);

  TransformFamily single;
  single.dofs = {{"rotation", DofDomain::Circle, 0.0, 0.0, 2, 1}};
  single.feature_dim = 2;
  TransformParams quarter;
  quarter.values["rotation"] = {kPi / 2};
  Tensor v = Tensor::from_data({1, 2}, {1.0, 0.0});
  Tensor w = apply(build_block_transform(single, quarter), v);
  CHECK(std::fabs(w.data()[0]) <= 1e-12);
  CHECK(w.data()[1] == Catch::Approx(1.0).margin(1e-12));

  // apply(p2, apply(p1, e)) == apply(compose(p2, p1), e), checked against a
  // dense matrix product.
  for (int t = 0; t < 20; ++t) {
    auto [p1, p2] = sample_composable_pair(desk, rng);
    Tensor chained = apply(build_block_transform(desk, p2),
                           apply(build_block_transform(desk, p1), e));
    Tensor composed = apply(build_block_transform(desk, compose(desk, p2, p1)), e);
    for (long i = 0; i < e.size(); ++i)
      CHECK(std::fabs(chained.data()[i] - composed.data()[i]) <= 1e-12);

    auto d2 = testutil::dense_operator(build_block_transform(desk, p2));
    auto d1 = testutil::dense_operator(build_block_transform(desk, p1));
    auto prod = testutil::matmul_ref(d2, d1, desk.feature_dim, desk.feature_dim,
                                     desk.feature_dim);
    auto dc = testutil::dense_operator(build_block_transform(desk, compose(desk, p2, p1)));
    CHECK(testutil::max_abs_diff(prod, dc) <= 1e-12);
  }

  Tensor bad = Tensor::zeros({2, desk.feature_dim + 1});
  CHECK_THROWS_AS(apply(build_block_transform(desk, identity_params(desk)), bad),
                  ShapeError);
}

TEST_CASE("apply preserves norms and is linear") {
  TransformFamily desk = testutil::desk_family();
  std::mt19937_64 rng(35);
  for (int t = 0; t < 25; ++t) {
    TransformParams p = sample_params(desk, rng);
    BlockOperator op = build_block_transform(desk, p);
    Tensor e = Tensor::uniform({1, desk.feature_dim}, -2.0, 2.0, rng);
    Tensor y = apply(op, e);
    double ne = 0.0, ny = 0.0;
    for (long i = 0; i < e.size(); ++i) {
      ne += e.data()[i] * e.data()[i];
      ny += y.data()[i] * y.data()[i];
    }
    CHECK(std::fabs(std::sqrt(ny) - std::sqrt(ne)) <= 1e-12 * std::sqrt(ne));

    Tensor e2 = Tensor::uniform({1, desk.feature_dim}, -2.0, 2.0, rng);
    Tensor lhs = apply(op, add(scale(e, 1.7), scale(e2, -0.6)));
    Tensor rhs = add(scale(apply(op, e), 1.7), scale(apply(op, e2), -0.6));
    for (long i = 0; i < lhs.size(); ++i)
      CHECK(std::fabs(lhs.data()[i] - rhs.data()[i]) <= 1e-12);
  }
}

TEST_CASE("apply is differentiable w.r.t. the code") {
  TransformFamily desk = testutil::desk_family(2);
  std::mt19937_64 rng(36);
  TransformParams p = sample_params(desk, rng);
  BlockOperator op = build_block_transform(desk, p);
  Tensor e = Tensor::uniform({3, desk.feature_dim}, -2.0, 2.0, rng, true);
  double err = testutil::max_grad_error([&] { return mean(square(apply(op, e))); }, {e});
  CHECK(err <= 1e-5);
}

TEST_CASE("compose: identity, circle addition, sphere matrix product") {
  TransformFamily desk = testutil::desk_family();
  std::mt19937_64 rng(37);
  TransformParams p = sample_params(desk, rng);
  TransformParams same = compose(desk, identity_params(desk), p);
  BlockOperator a = build_block_transform(desk, same);
  BlockOperator b = build_block_transform(desk, p);
  for (size_t d = 0; d < a.blocks.size(); ++d)
    CHECK(max_abs_diff(a.blocks[d], b.blocks[d]) <= 1e-12);

  TransformFamily circle;
  circle.dofs = {{"rotation", DofDomain::Circle, 0.0, 0.0, 2, 1}};
  circle.feature_dim = 2;
  TransformParams c1, c2;
  c1.values["rotation"] = {0.5};
  c2.values["rotation"] = {0.3};
  CHECK(compose(circle, c2, c1).values.at("rotation")[0] ==
        Catch::Approx(0.8).margin(1e-15));

  TransformFamily face = face_family();
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int t = 0; t < 50; ++t) {
    TransformParams q1, q2;
    q1.values["rotation"] = {u(rng), u(rng)};
    q1.values["lighting"] = {u(rng), u(rng)};
    q2.values["rotation"] = {u(rng), u(rng)};
    q2.values["lighting"] = {u(rng), u(rng)};
    TransformParams qc = compose(face, q2, q1);
    BlockOperator oc = build_block_transform(face, qc);
    BlockOperator o2 = build_block_transform(face, q2);
    BlockOperator o1 = build_block_transform(face, q1);
    for (size_t d = 0; d < oc.blocks.size(); ++d)
      CHECK(max_abs_diff(oc.blocks[d], matmul(o2.blocks[d], o1.blocks[d])) <= 1e-12);
  }
}

TEST_CASE("compose rejects interval results outside the mapped range") {
  TransformFamily desk = testutil::desk_family();
  TransformParams p1 = identity_params(desk);
  TransformParams p2 = identity_params(desk);
  p1.values["scale-x"] = {1.2};
  p2.values["scale-x"] = {1.2};  // mapped angles sum beyond pi
  CHECK_THROWS_AS(compose(desk, p2, p1), DomainError);
}

TEST_CASE("invert: identity, circle negation, round trips") {
  TransformFamily desk = testutil::desk_family();
  TransformParams id = identity_params(desk);
  TransformParams inv_id = invert(desk, id);
  BlockOperator a = build_block_transform(desk, inv_id);
  for (const Mat& b : a.blocks) CHECK(max_abs_diff(b, Mat::identity(b.n)) <= 1e-15);

  TransformFamily circle;
  circle.dofs = {{"rotation", DofDomain::Circle, 0.0, 0.0, 2, 1}};
  circle.feature_dim = 2;
  TransformParams c;
  c.values["rotation"] = {1.1};
  CHECK(invert(circle, c).values.at("rotation")[0] ==
        Catch::Approx(kTwoPi - 1.1).margin(1e-15));

  // Round trip through every dof kind, including a sphere dof.
  TransformFamily mixed;
  mixed.dofs = {
      {"rotation", DofDomain::Circle, 0.0, 0.0, 2, 2},
      {"scale-x", DofDomain::Interval, 0.7, 1.3, 2, 2},
      {"pose", DofDomain::Sphere, 0.0, 0.0, 3, 1},
  };
  mixed.feature_dim = 2 * 2 + 2 * 2 + 3;
  mixed.validate();
  std::mt19937_64 rng(38);
  for (int t = 0; t < 50; ++t) {
    TransformParams p = sample_params(mixed, rng);
    Tensor e = Tensor::uniform({2, mixed.feature_dim}, -2.0, 2.0, rng);
    Tensor round = apply(build_block_transform(mixed, invert(mixed, p)),
                         apply(build_block_transform(mixed, p), e));
    for (long i = 0; i < e.size(); ++i)
      CHECK(std::fabs(round.data()[i] - e.data()[i]) <= 1e-12);

    // compose(invert(p), p) is the identity transform.
    TransformParams unit = compose(mixed, invert(mixed, p), p);
    BlockOperator u = build_block_transform(mixed, unit);
    for (const Mat& b : u.blocks)
      CHECK(max_abs_diff(b, Mat::identity(b.n)) <= 1e-12);
  }
}

TEST_CASE("invariant_signature values and ordering") {
  TransformFamily single;
  single.dofs = {{"rotation", DofDomain::Circle, 0.0, 0.0, 2, 1}};
  single.feature_dim = 2;
  Tensor e = Tensor::from_data({1, 2}, {3.0, 4.0});
  Tensor sig = invariant_signature(single, e);
  REQUIRE(sig.size() == 1);
  CHECK(sig.data()[0] == 25.0);

  TransformFamily two;
  two.dofs = {{"rotation", DofDomain::Circle, 0.0, 0.0, 2, 2}};
  two.feature_dim = 4;
  Tensor e2 = Tensor::from_data({1, 4}, {1.0, 0.0, 0.0, 1.0});
  Tensor sig2 = invariant_signature(two, e2);
  REQUIRE(sig2.size() == 3);  // (0,0), (0,1), (1,1)
  CHECK(sig2.data()[0] == 1.0);
  CHECK(sig2.data()[1] == 0.0);
  CHECK(sig2.data()[2] == 1.0);

  Tensor bad = Tensor::zeros({1, 5});
  CHECK_THROWS_AS(invariant_signature(two, bad), ShapeError);
}

TEST_CASE("invariant_signature is invariant under apply") {
  TransformFamily desk = testutil::desk_family();
  std::mt19937_64 rng(39);
  for (int t = 0; t < 100; ++t) {
    TransformParams p = sample_params(desk, rng);
    Tensor e = Tensor::uniform({1, desk.feature_dim}, -2.0, 2.0, rng);
    Tensor y = apply(build_block_transform(desk, p), e);
    Tensor s1 = invariant_signature(desk, e);
    Tensor s2 = invariant_signature(desk, y);
    for (long i = 0; i < s1.size(); ++i)
      CHECK(std::fabs(s1.data()[i] - s2.data()[i]) <= 1e-9);
  }
}

TEST_CASE("invariant_signature is differentiable") {
  TransformFamily desk = testutil::desk_family(2);
  std::mt19937_64 rng(40);
  Tensor e = Tensor::uniform({2, desk.feature_dim}, -2.0, 2.0, rng, true);
  double err = testutil::max_grad_error(
      [&] { return mean(square(invariant_signature(desk, e))); }, {e});
  CHECK(err <= 1e-5);
}

TEST_CASE("audit residuals vanish at identity and bound random trials") {
  TransformFamily desk = testutil::desk_family();
  TransformParams id = identity_params(desk);
  CHECK(homomorphism_residual(desk, id, id) == 0.0);
  CHECK(inverse_residual(desk, id) == 0.0);
  CHECK(identity_residual(desk) == 0.0);

  AuditReport rep = audit_homomorphism(mnist_family(), 100, 7);
  CHECK(rep.homomorphism <= 1e-12);
  CHECK(rep.inverse <= 1e-12);
  CHECK(rep.identity <= 1e-12);
  CHECK(rep.norm <= 1e-12);
  CHECK(rep.signature <= 1e-9);
  CHECK(rep.within(1e-12, 1e-9));

  // Deterministic given the seed.
  AuditReport rep2 = audit_homomorphism(mnist_family(), 100, 7);
  CHECK(rep.homomorphism == rep2.homomorphism);
  CHECK(rep.signature == rep2.signature);

  CHECK_THROWS_AS(audit_homomorphism(desk, 0, 1), ValueError);
}

TEST_CASE("a corrupted non-orthogonal block is flagged by the norm residual") {
  BlockOperator op;
  op.feature_dim = 2;
  Mat bad;
  bad.n = 2;
  bad.at(0, 0) = 1.1;
  bad.at(1, 1) = 0.9;
  op.blocks = {bad};
  op.repetitions = {1};
  std::mt19937_64 rng(41);
  auto e = testutil::random_vec(2, 0.5, 1.5, rng);
  CHECK(norm_residual(op, e) > 1e-6);
}

TEST_CASE("dense oracle confirms the blockwise homomorphism at full width") {
  TransformFamily mnist = mnist_family();
  std::mt19937_64 rng(42);
  for (int t = 0; t < 3; ++t) {
    auto [p1, p2] = sample_composable_pair(mnist, rng);
    auto d2 = testutil::dense_operator(build_block_transform(mnist, p2));
    auto d1 = testutil::dense_operator(build_block_transform(mnist, p1));
    auto prod = testutil::matmul_ref(d2, d1, 510, 510, 510);
    auto dc = testutil::dense_operator(
        build_block_transform(mnist, compose(mnist, p2, p1)));
    CHECK(testutil::max_abs_diff(prod, dc) <= 1e-12);
  }
}

TEST_CASE("family JSON round trip is lossless") {
  TransformFamily mnist = mnist_family();
  nlohmann::json j = family_to_json(mnist);
  TransformFamily back = family_from_json(j);
  CHECK(back.feature_dim == mnist.feature_dim);
  REQUIRE(back.dofs.size() == mnist.dofs.size());
  for (size_t i = 0; i < mnist.dofs.size(); ++i) {
    CHECK(back.dofs[i].name == mnist.dofs[i].name);
    CHECK(back.dofs[i].domain == mnist.dofs[i].domain);
    CHECK(back.dofs[i].lo == mnist.dofs[i].lo);
    CHECK(back.dofs[i].hi == mnist.dofs[i].hi);
    CHECK(back.dofs[i].block_dim == mnist.dofs[i].block_dim);
    CHECK(back.dofs[i].repetitions == mnist.dofs[i].repetitions);
  }
  CHECK(family_to_json(back).dump() == j.dump());

  CHECK_THROWS_AS(family_from_json_text("{not json"), DataError);
  CHECK_THROWS_AS(family_from_json_text(R"({"dofs":[],"feature_dim":3})"), DataError);
}

TEST_CASE("family validation catches bad specs") {
  TransformFamily f;
  f.dofs = {{"s", DofDomain::Sphere, 0.0, 0.0, 2, 1}};
  f.feature_dim = 2;
  CHECK_THROWS_AS(f.validate(), ValueError);

  TransformFamily g;
  g.dofs = {{"i", DofDomain::Interval, 1.3, 0.7, 2, 1}};
  g.feature_dim = 2;
  CHECK_THROWS_AS(g.validate(), ValueError);

  TransformFamily h;
  h.dofs = {{"c", DofDomain::Circle, 0.0, 0.0, 2, 3}};
  h.feature_dim = 5;
  CHECK_THROWS_AS(h.validate(), ValueError);
}
