#include "costalign/eval.hpp"
#include "costalign/shaperepair.hpp"

#include "../support/expect_error.hpp"
#include "../support/fixtures.hpp"

#include <doctest.h>

#include <sstream>

using namespace costalign;
using namespace costalign::shape;

namespace {

BinaryMask disc(int size, double cx, double cy, double r) { return ellipse_mask(size, size, cx, cy, r, r, 0.0); }

struct SmallModel {
  std::vector<BinaryMask> masks;
  LinearEmbedding embedding;
  ValidManifold manifold;
};

const SmallModel& small_model() {
  static const SmallModel m = [] {
    SmallModel s;
    s.masks = random_ellipses(200, 32, 32, 1);
    s.embedding = train_embedding(s.masks, kDefaultModelDim);
    ManifoldParams p;
    p.target_count = 3000;
    p.rng_seed = 4;
    s.manifold = build_manifold(s.embedding, s.masks, p);
    return s;
  }();
  return m;
}

}  // namespace

TEST_CASE("pgm round trip and parsing") {
  std::mt19937_64 rng(1);
  const auto m = fixtures::random_mask(rng, 7, 5, 0.4);
  std::stringstream ss;
  write_pgm(ss, m);
  CHECK(read_pgm(ss) == m);

  std::istringstream ascii("P2\n# c\n3 2\n1\n1 0 1\n0 1 0\n");
  const auto a = read_pgm(ascii);
  CHECK(a.width == 3);
  CHECK(a.height == 2);
  CHECK(a.data == std::vector<std::uint8_t>{1, 0, 1, 0, 1, 0});

  std::istringstream grey("P2 2 1 255 127 128");
  CHECK(read_pgm(grey).data == std::vector<std::uint8_t>{0, 1});
  std::istringstream bad("P2 2 1 1 0 2");
  CHECK_ERROR_CODE(read_pgm(bad), ErrorCode::ParseError);
  std::istringstream magic("P9 1 1 1 0");
  CHECK_ERROR_CODE(read_pgm(magic), ErrorCode::ParseError);
  CHECK_ERROR_CODE(read_pgm(std::filesystem::path("/nonexistent/m.pgm")), ErrorCode::IoError);
}

TEST_CASE("one-hot training set reconstructs exactly") {
  std::vector<BinaryMask> masks;
  for (int i = 0; i < 6; ++i) {
    BinaryMask m(4, 4);
    m.data[static_cast<std::size_t>(3 * i)] = 1;
    masks.push_back(m);
  }
  const auto e = train_embedding(masks, 6);
  for (const auto& m : masks) {
    const auto d = e.decode(e.encode(m));
    CHECK(d.same_shape(m));
    CHECK(d == m);
  }
  const auto& c = e.components();
  CHECK((c.transpose() * c - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("32-dimensional embedding reconstructs ellipses") {
  const auto masks = random_ellipses(200, 32, 32, 2);
  const auto e = train_embedding(masks, kDefaultEmbeddingDim);
  double mean = 0.0;
  for (const auto& m : masks) mean += eval::dice(e.decode(e.encode(m)), m) / 200.0;
  CHECK(mean >= 0.95);
}

TEST_CASE("embedding errors") {
  const auto masks = random_ellipses(5, 16, 16, 3);
  CHECK_ERROR_CODE(train_embedding(std::vector<BinaryMask>{}, 2), ErrorCode::EmptyInput);
  CHECK_ERROR_CODE(train_embedding(masks, 6), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(train_embedding(masks, 0), ErrorCode::InvalidParams);
  auto mixed = masks;
  mixed.push_back(BinaryMask(8, 8));
  CHECK_ERROR_CODE(train_embedding(mixed, 2), ErrorCode::DimensionMismatch);
  const auto e = train_embedding(masks, 2);
  CHECK_ERROR_CODE(e.encode(BinaryMask(8, 8)), ErrorCode::DimensionMismatch);
}

TEST_CASE("shape_valid") {
  CHECK(shape_valid(ellipse_mask(32, 32, 16, 16, 10, 6, 0.3)));
  BinaryMask annulus = disc(32, 16, 16, 10);
  const auto inner = disc(32, 16, 16, 4);
  for (std::size_t i = 0; i < annulus.data.size(); ++i) annulus.data[i] &= !inner.data[i];
  CHECK_FALSE(shape_valid(annulus));
  CHECK_FALSE(shape_valid(BinaryMask(8, 8)));

  BinaryMask big(64, 64);
  for (int y = 2; y < 22; ++y) {
    for (int x = 2; x < 22; ++x) big.set(x, y, true);
  }
  auto with_ten = big, with_one = big;
  for (int y = 40; y < 50; ++y) {
    for (int x = 40; x < 44; ++x) with_ten.set(x, y, true);
  }
  for (int y = 40; y < 42; ++y) {
    for (int x = 40; x < 42; ++x) with_one.set(x, y, true);
  }
  CHECK(with_ten.area() - big.area() == 40);
  CHECK(with_one.area() - big.area() == 4);
  CHECK_FALSE(shape_valid(with_ten));
  CHECK(shape_valid(with_one));

  BinaryMask corner(8, 8);
  corner.set(0, 0, true);
  corner.set(1, 1, true);
  CHECK(shape_valid(corner));
}

TEST_CASE("manifold invariants") {
  const auto& m = small_model();
  const auto& man = m.manifold;
  CHECK(man.size() == 3000);
  CHECK(man.dim() == kDefaultModelDim);
  for (Eigen::Index i = 0; i < man.samples.rows(); ++i) {
    CHECK(shape_valid(m.embedding.decode(man.samples.row(i).transpose())));
  }
  for (Eigen::Index i = 0; i < man.kde_centers.rows(); ++i) {
    const Eigen::VectorXd z = man.kde_centers.row(i).transpose();
    CHECK(man.log_kde(z) <= man.log_k_rs + man.log_gaussian(z) + 1e-12);
  }
  CHECK(man.proposals >= man.size());
}

TEST_CASE("kde integrates to one") {
  const auto& man = small_model().manifold;
  auto rng = make_rng(9, "mc");
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::LLT<Eigen::MatrixXd> llt(man.gaussian_cov);
  const Eigen::MatrixXd l = llt.matrixL();
  const int n = 40000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e(man.dim());
    for (auto& v : e) v = g(rng);
    const Eigen::VectorXd z = man.gaussian_mean + l * e;
    acc += std::exp(man.log_kde(z) - man.log_gaussian(z));
  }
  CHECK(acc / n == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("manifold determinism") {
  const auto& m = small_model();
  ManifoldParams p;
  p.target_count = 3000;
  p.rng_seed = 4;
  const auto again = build_manifold(m.embedding, m.masks, p);
  CHECK(again.samples == m.manifold.samples);
  CHECK(again.proposals == m.manifold.proposals);
  p.rng_seed = 5;
  CHECK(build_manifold(m.embedding, m.masks, p).samples != m.manifold.samples);
}

TEST_CASE("single training mask terminates with a floored covariance") {
  const auto masks = random_ellipses(3, 32, 32, 5);
  const auto e = train_embedding(masks, 2);
  ManifoldParams p;
  p.target_count = 20;
  const std::vector<BinaryMask> one{masks[0]};
  const auto man = build_manifold(e, one, p);
  CHECK(man.size() == 20);
  CHECK(man.gaussian_cov.isApprox(1e-6 * Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("manifold starvation") {
  const auto& m = small_model();
  ManifoldParams p;
  p.target_count = 1000;
  p.starvation_window = 100;
  p.min_acceptance = 0.999;
  CHECK_ERROR_CODE(build_manifold(m.embedding, m.masks, p), ErrorCode::ManifoldStarved);
  p = {};
  p.safety = 0.5;
  CHECK_ERROR_CODE(build_manifold(m.embedding, m.masks, p), ErrorCode::InvalidParams);
}

TEST_CASE("repair of training masks is a near fixed point") {
  const auto& m = small_model();
  double mean = 0.0;
  for (const auto& mask : m.masks) {
    const double d = eval::dice(repair(mask, m.embedding, m.manifold), mask);
    CHECK(d >= 0.85);
    mean += d / static_cast<double>(m.masks.size());
  }
  CHECK(mean >= 0.9);
}

TEST_CASE("repair of a wedge cut improves overlap") {
  const auto& m = small_model();
  const auto original = random_ellipses(1, 32, 32, 77)[0];
  const auto decayed = wedge_decay(original, 0.7, 35.0 * std::numbers::pi / 180.0);
  CHECK(decayed.area() < original.area());
  const auto repaired = repair(decayed, m.embedding, m.manifold);
  CHECK(eval::dice(repaired, original) > eval::dice(decayed, original));
  CHECK(shape_valid(repaired));
  CHECK(repair(decayed, m.embedding, m.manifold, 5).same_shape(original));
  CHECK_ERROR_CODE(repair(decayed, m.embedding, m.manifold, 0), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(repair(decayed, m.embedding, ValidManifold{}), ErrorCode::EmptyInput);
}

TEST_CASE("shape model json round trip") {
  const auto& m = small_model();
  const ShapeModel model{m.embedding, m.manifold};
  const auto back = shape_model_from_json(nlohmann::json::parse(to_json(model).dump()));
  CHECK(back.embedding.components() == m.embedding.components());
  CHECK(back.embedding.mean() == m.embedding.mean());
  CHECK(back.manifold.samples == m.manifold.samples);
  CHECK(back.manifold.log_k_rs == m.manifold.log_k_rs);
  CHECK_ERROR_CODE(shape_model_from_json(nlohmann::json{{"width", 3}}), ErrorCode::ParseError);
}

TEST_CASE("synthetic mask generators") {
  const auto a = random_ellipses(20, 32, 32, 3);
  CHECK(a == random_ellipses(20, 32, 32, 3));
  for (const auto& m : a) CHECK(shape_valid(m));
  const auto d1 = random_decay(a[0], 8);
  CHECK(d1 == random_decay(a[0], 8));
  CHECK(d1 != a[0]);
  const auto w = random_wedge_decay(a[0], 8);
  CHECK(w.area() < a[0].area());
}
