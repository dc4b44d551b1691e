#include "costalign/shaperepair.hpp"

#include "costalign/error.hpp"
#include "costalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>

namespace costalign::shape {

BinaryMask::BinaryMask(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw Error(ErrorCode::InvalidParams, "mask dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
}

std::size_t BinaryMask::area() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  if (tok.empty()) throw Error(ErrorCode::ParseError, "truncated PGM header");
  return tok;
}

int parse_int(const std::string& tok) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw Error(ErrorCode::ParseError, "bad PGM integer: " + tok);
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::ParseError, "bad PGM integer: " + tok);
  }
}

}  // namespace

BinaryMask read_pgm(std::istream& in) {
  const std::string magic = next_token(in);
  if (magic != "P2" && magic != "P5") throw Error(ErrorCode::ParseError, "not a P2/P5 PGM: " + magic);
  const int w = parse_int(next_token(in));
  const int h = parse_int(next_token(in));
  const int maxval = parse_int(next_token(in));
  if (w <= 0 || h <= 0) throw Error(ErrorCode::ParseError, "PGM dimensions must be positive");
  if (maxval != 1 && maxval != 255) throw Error(ErrorCode::ParseError, "PGM maxval must be 1 or 255");
  BinaryMask m(w, h);
  auto to_bit = [&](int v) {
    if (v < 0 || v > maxval) throw Error(ErrorCode::ParseError, "PGM value out of range");
    return maxval == 1 ? v != 0 : v >= 128;
  };
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    int v;
    if (magic == "P2") {
      v = parse_int(next_token(in));
    } else {
      const int c = in.get();
      if (c == std::char_traits<char>::eof()) throw Error(ErrorCode::ParseError, "truncated PGM raster");
      v = c;
    }
    m.data[i] = to_bit(v) ? 1 : 0;
  }
  return m;
}

BinaryMask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mask", {{"path", path.string()}});
  try {
    return read_pgm(in);
  } catch (const Error& e) {
    auto ctx = e.context();
    ctx["path"] = path.string();
    throw Error(e.code(), e.what(), ctx);
  }
}

void write_pgm(std::ostream& out, const BinaryMask& mask) {
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  for (auto v : mask.data) out.put(static_cast<char>(v ? 255 : 0));
}

void write_pgm(const std::filesystem::path& path, const BinaryMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write mask", {{"path", path.string()}});
  write_pgm(out, mask);
}

LinearEmbedding::LinearEmbedding(int width, int height, Eigen::VectorXd mean, Eigen::MatrixXd components)
    : width_(width), height_(height), mean_(std::move(mean)), components_(std::move(components)) {
  if (mean_.size() != static_cast<Eigen::Index>(width) * height || components_.rows() != mean_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "embedding size does not match raster");
  }
}

Eigen::VectorXd LinearEmbedding::encode(const BinaryMask& mask) const {
  if (mask.width != width_ || mask.height != height_) {
    throw Error(ErrorCode::DimensionMismatch, "mask raster differs from embedding",
                {{"expected", std::to_string(width_) + "x" + std::to_string(height_)},
                 {"got", std::to_string(mask.width) + "x" + std::to_string(mask.height)}});
  }
  Eigen::VectorXd x(mean_.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = mask.data[static_cast<std::size_t>(i)];
  return components_.transpose() * (x - mean_);
}

BinaryMask LinearEmbedding::decode(const Eigen::VectorXd& z) const {
  if (z.size() != components_.cols()) throw Error(ErrorCode::DimensionMismatch, "latent vector has wrong length");
  const Eigen::VectorXd x = mean_ + components_ * z;
  BinaryMask m(width_, height_);
  for (Eigen::Index i = 0; i < x.size(); ++i) m.data[static_cast<std::size_t>(i)] = x(i) > 0.5 ? 1 : 0;
  return m;
}

LinearEmbedding train_embedding(std::span<const BinaryMask> masks, int dim) {
  if (masks.empty()) throw Error(ErrorCode::EmptyInput, "no training masks");
  if (dim < 1) throw Error(ErrorCode::InvalidParams, "latent dimension must be >= 1");
  const int w = masks[0].width, h = masks[0].height;
  for (const auto& m : masks) {
    if (m.width != w || m.height != h) throw Error(ErrorCode::DimensionMismatch, "training masks differ in size");
  }
  const auto n = static_cast<Eigen::Index>(masks.size());
  const Eigen::Index p = static_cast<Eigen::Index>(w) * h;
  if (n < dim || p < dim) {
    throw Error(ErrorCode::InvalidParams, "fewer masks or pixels than latent dimensions",
                {{"masks", std::to_string(n)}, {"dim", std::to_string(dim)}});
  }
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) x(r, c) = masks[static_cast<std::size_t>(r)].data[static_cast<std::size_t>(c)];
  }
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  x.rowwise() -= mean.transpose();
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  Eigen::MatrixXd comp = svd.matrixV().leftCols(dim);
  for (Eigen::Index j = 0; j < comp.cols(); ++j) {
    Eigen::Index arg;
    comp.col(j).cwiseAbs().maxCoeff(&arg);
    if (comp(arg, j) < 0.0) comp.col(j) *= -1.0;
  }
  return LinearEmbedding(w, h, mean, comp);
}

namespace {

/// Areas of 8-connected foreground components.
std::vector<std::size_t> foreground_components(const BinaryMask& m) {
  std::vector<int> seen(m.data.size(), 0);
  std::vector<std::size_t> areas;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * m.width + x;
      if (!m.data[idx] || seen[idx]) continue;
      std::size_t area = 0;
      seen[idx] = 1;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++area;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * m.width + nx;
            if (m.data[j] && !seen[j]) {
              seen[j] = 1;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
      areas.push_back(area);
    }
  }
  return areas;
}

bool has_hole(const BinaryMask& m) {
  std::vector<int> outside(m.data.size(), 0);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * m.width + x;
    if (!m.data[i] && !outside[i]) {
      outside[i] = 1;
      stack.emplace_back(x, y);
    }
  };
  for (int x = 0; x < m.width; ++x) {
    seed(x, 0);
    seed(x, m.height - 1);
  }
  for (int y = 0; y < m.height; ++y) {
    seed(0, y);
    seed(m.width - 1, y);
  }
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};
  while (!stack.empty()) {
    const auto [cx, cy] = stack.back();
    stack.pop_back();
    for (int k = 0; k < 4; ++k) {
      const int nx = cx + kDx[k], ny = cy + kDy[k];
      if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
      seed(nx, ny);
    }
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!m.data[i] && !outside[i]) return true;
  }
  return false;
}

}  // namespace

bool shape_valid(const BinaryMask& mask) {
  if (mask.data.empty()) return false;
  const auto areas = foreground_components(mask);
  if (areas.empty()) return false;
  const std::size_t largest = *std::max_element(areas.begin(), areas.end());
  bool seen_largest = false;
  for (std::size_t a : areas) {
    if (a == largest && !seen_largest) {
      seen_largest = true;
      continue;
    }
    if (static_cast<double>(a) >= kSecondaryAreaFraction * static_cast<double>(largest)) return false;
  }
  return !has_hole(mask);
}

void ManifoldParams::validate() const {
  if (target_count < 1) throw Error(ErrorCode::InvalidParams, "target_count must be >= 1");
  if (!(safety >= 1.0)) throw Error(ErrorCode::InvalidParams, "safety factor must be >= 1");
  if (starvation_window < 1) throw Error(ErrorCode::InvalidParams, "starvation_window must be >= 1");
  if (!(min_acceptance >= 0.0 && min_acceptance < 1.0)) throw Error(ErrorCode::InvalidParams, "min_acceptance must lie in [0, 1)");
  if (!(covariance_floor > 0.0)) throw Error(ErrorCode::InvalidParams, "covariance_floor must be > 0");
}

double ValidManifold::log_kde(const Eigen::VectorXd& z) const {
  const Eigen::Index n = kde_centers.rows(), d = kde_centers.cols();
  const Eigen::ArrayXd inv_h = kde_bandwidth.array().inverse();
  double mx = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd e(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    e(i) = -0.5 * ((z.transpose() - kde_centers.row(i)).array() * inv_h.transpose()).square().sum();
    mx = std::max(mx, e(i));
  }
  const double lse = mx + std::log((e.array() - mx).exp().sum());
  const double log_norm = kde_bandwidth.array().log().sum() + 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  return lse - std::log(static_cast<double>(n)) - log_norm;
}

double ValidManifold::log_gaussian(const Eigen::VectorXd& z) const {
  const Eigen::LLT<Eigen::MatrixXd> llt(gaussian_cov);
  const Eigen::VectorXd r = llt.matrixL().solve(z - gaussian_mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * r.squaredNorm() - 0.5 * log_det - 0.5 * static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi);
}

ValidManifold build_manifold(const LatentEmbedding& embedding, std::span<const BinaryMask> valid_masks,
                             const ManifoldParams& params) {
  params.validate();
  if (valid_masks.empty()) throw Error(ErrorCode::EmptyInput, "no valid masks for the manifold");
  const int d = embedding.dim();
  const auto n = static_cast<Eigen::Index>(valid_masks.size());

  ValidManifold vm;
  vm.kde_centers.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) vm.kde_centers.row(i) = embedding.encode(valid_masks[static_cast<std::size_t>(i)]).transpose();

  vm.gaussian_mean = vm.kde_centers.colwise().mean().transpose();
  const Eigen::MatrixXd centered = vm.kde_centers.rowwise() - vm.gaussian_mean.transpose();
  vm.gaussian_cov = n > 1 ? Eigen::MatrixXd(centered.transpose() * centered / static_cast<double>(n - 1))
                          : Eigen::MatrixXd(Eigen::MatrixXd::Zero(d, d));
  vm.gaussian_cov.diagonal().array() += params.covariance_floor;

  // Scott's rule per dimension, floored like the covariance.
  const double scott = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
  vm.kde_bandwidth.resize(d);
  for (int j = 0; j < d; ++j) {
    const double sd = n > 1 ? std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n - 1)) : 0.0;
    vm.kde_bandwidth(j) = std::max(sd * scott, std::sqrt(params.covariance_floor));
  }

  const Eigen::LLT<Eigen::MatrixXd> llt(vm.gaussian_cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NumericalFailure, "proposal covariance is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  const double log_q_norm = -0.5 * log_det - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  auto log_q = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd r = chol.triangularView<Eigen::Lower>().solve(z - vm.gaussian_mean);
    return -0.5 * r.squaredNorm() + log_q_norm;
  };

  double max_ratio = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd z = vm.kde_centers.row(i).transpose();
    max_ratio = std::max(max_ratio, vm.log_kde(z) - log_q(z));
  }
  vm.log_k_rs = max_ratio + std::log(params.safety);

  Rng rng = make_rng(params.rng_seed, "manifold");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> accepted;
  accepted.reserve(params.target_count);
  Eigen::VectorXd e(d);
  while (accepted.size() < params.target_count) {
    if (vm.proposals > 0 && vm.proposals % params.starvation_window == 0 &&
        static_cast<double>(accepted.size()) < params.min_acceptance * static_cast<double>(vm.proposals)) {
      throw Error(ErrorCode::ManifoldStarved, "rejection sampler acceptance below threshold",
                  {{"proposals", std::to_string(vm.proposals)}, {"accepted", std::to_string(accepted.size())},
                   {"dim", std::to_string(d)}});
    }
    for (int j = 0; j < d; ++j) e(j) = gauss(rng);
    const Eigen::VectorXd z = vm.gaussian_mean + chol * e;
    const double u = unit(rng);
    ++vm.proposals;
    if (!(std::log(u) + vm.log_k_rs + log_q(z) < vm.log_kde(z))) continue;
    if (!shape_valid(embedding.decode(z))) continue;
    accepted.push_back(z);
  }
  vm.samples.resize(static_cast<Eigen::Index>(accepted.size()), d);
  for (std::size_t i = 0; i < accepted.size(); ++i) vm.samples.row(static_cast<Eigen::Index>(i)) = accepted[i].transpose();
  return vm;
}

BinaryMask repair(const BinaryMask& mask, const LatentEmbedding& embedding, const ValidManifold& manifold, int k) {
  if (manifold.size() == 0) throw Error(ErrorCode::EmptyInput, "empty manifold");
  if (k < 1) throw Error(ErrorCode::InvalidParams, "k must be >= 1");
  const Eigen::VectorXd z = embedding.encode(mask);
  std::vector<std::pair<double, Eigen::Index>> d;
  d.reserve(manifold.size());
  for (Eigen::Index i = 0; i < manifold.samples.rows(); ++i) {
    d.emplace_back((manifold.samples.row(i).transpose() - z).squaredNorm(), i);
  }
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(z.size());
  for (std::size_t i = 0; i < kk; ++i) mean += manifold.samples.row(d[i].second).transpose();
  return embedding.decode(mean / static_cast<double>(kk));
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(ErrorCode::ParseError, "ragged matrix in model");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json to_json(const ShapeModel& model) {
  const auto& e = model.embedding;
  const auto& m = model.manifold;
  nlohmann::json j;
  j["width"] = e.width();
  j["height"] = e.height();
  j["latent_dim"] = e.dim();
  j["mean"] = vec(e.mean());
  j["components"] = matrix_json(e.components().transpose());
  j["manifold"] = {
      {"samples", matrix_json(m.samples)},
      {"kde_centers", matrix_json(m.kde_centers)},
      {"kde_bandwidth", vec(m.kde_bandwidth)},
      {"gaussian_mean", vec(m.gaussian_mean)},
      {"gaussian_cov", matrix_json(m.gaussian_cov)},
      {"log_k_rs", m.log_k_rs},
      {"proposals", m.proposals},
  };
  return j;
}

ShapeModel shape_model_from_json(const nlohmann::json& j) {
  try {
    const int w = j.at("width").get<int>(), h = j.at("height").get<int>();
    const int d = j.at("latent_dim").get<int>();
    const Eigen::Index p = static_cast<Eigen::Index>(w) * h;
    ShapeModel model;
    const Eigen::MatrixXd comp_t = json_matrix(j.at("components"), p);
    if (comp_t.rows() != d) throw Error(ErrorCode::ParseError, "component count differs from latent_dim");
    model.embedding = LinearEmbedding(w, h, json_vector(j.at("mean")), comp_t.transpose());
    const auto& mj = j.at("manifold");
    auto& m = model.manifold;
    m.samples = json_matrix(mj.at("samples"), d);
    m.kde_centers = json_matrix(mj.at("kde_centers"), d);
    m.kde_bandwidth = json_vector(mj.at("kde_bandwidth"));
    m.gaussian_mean = json_vector(mj.at("gaussian_mean"));
    m.gaussian_cov = json_matrix(mj.at("gaussian_cov"), d);
    m.log_k_rs = mj.at("log_k_rs").get<double>();
    m.proposals = mj.at("proposals").get<std::size_t>();
    return model;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("malformed shape model: ") + ex.what());
  }
}

BinaryMask ellipse_mask(int width, int height, double cx, double cy, double a, double b, double angle) {
  BinaryMask m(width, height);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (c * dx + s * dy) / a, v = (-s * dx + c * dy) / b;
      m.set(x, y, u * u + v * v <= 1.0);
    }
  }
  return m;
}

std::vector<BinaryMask> random_ellipses(std::size_t count, int width, int height, std::uint64_t seed) {
  Rng rng = make_rng(seed, "shape.ellipses");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double size = std::min(width, height);
  std::vector<BinaryMask> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double cx = 0.5 * width + kEllipseCentreJitter * (2.0 * unit(rng) - 1.0);
    const double cy = 0.5 * height + kEllipseCentreJitter * (2.0 * unit(rng) - 1.0);
    const double a = size * (0.2 + 0.15 * unit(rng));
    const double b = size * (0.13 + 0.12 * unit(rng));
    const double angle = kEllipseAngleSpread * (2.0 * unit(rng) - 1.0);
    out.push_back(ellipse_mask(width, height, cx, cy, a, b, angle));
  }
  return out;
}

BinaryMask wedge_decay(const BinaryMask& mask, double direction, double half_angle) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      sx += x + 0.5;
      sy += y + 0.5;
      ++n;
    }
  }
  BinaryMask out = mask;
  if (n == 0) return out;
  const double cx = sx / static_cast<double>(n), cy = sy / static_cast<double>(n);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const double ang = std::atan2(y + 0.5 - cy, x + 0.5 - cx);
      const double diff = std::remainder(ang - direction, 2.0 * std::numbers::pi);
      if (std::abs(diff) <= half_angle) out.set(x, y, false);
    }
  }
  return out;
}

BinaryMask random_wedge_decay(const BinaryMask& mask, std::uint64_t seed) {
  Rng rng = make_rng(seed, "shape.decay");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double direction = 2.0 * std::numbers::pi * unit(rng);
  const double half_angle = (25.0 + 15.0 * unit(rng)) * std::numbers::pi / 180.0;
  return wedge_decay(mask, direction, half_angle);
}

namespace {

void paint_disc(BinaryMask& m, int cx, int cy, double radius, bool value) {
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius) m.set(x, y, value);
    }
  }
}

bool window_is(const BinaryMask& m, int cx, int cy, int half, bool value) {
  for (int y = cy - half; y <= cy + half; ++y) {
    for (int x = cx - half; x <= cx + half; ++x) {
      if (x < 0 || y < 0 || x >= m.width || y >= m.height) return false;
      if (static_cast<bool>(m.at(x, y)) != value) return false;
    }
  }
  return true;
}

}  // namespace

BinaryMask random_decay(const BinaryMask& mask, std::uint64_t seed, int holes, int fragments) {
  BinaryMask out = random_wedge_decay(mask, seed);
  Rng rng = make_rng(seed, "shape.defects");
  std::uniform_int_distribution<int> px(0, mask.width - 1), py(0, mask.height - 1);
  constexpr int kAttempts = 1000;
  for (int placed = 0, tries = 0; placed < holes && tries < kAttempts; ++tries) {
    const int x = px(rng), y = py(rng);
    if (!window_is(out, x, y, 3, true)) continue;
    paint_disc(out, x, y, 1.0, false);
    ++placed;
  }
  for (int placed = 0, tries = 0; placed < fragments && tries < kAttempts; ++tries) {
    const int x = px(rng), y = py(rng);
    if (!window_is(mask, x, y, 4, false)) continue;
    paint_disc(out, x, y, 1.5, true);
    ++placed;
  }
  return out;
}

}  // namespace costalign::shape
