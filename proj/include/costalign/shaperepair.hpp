#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace costalign::shape {

/// Row-major 0/1 raster.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h);

  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t area() const;
  std::size_t pixel_count() const noexcept { return data.size(); }
  bool same_shape(const BinaryMask& o) const noexcept { return width == o.width && height == o.height; }
  bool operator==(const BinaryMask& o) const = default;
};

/// P2 or P5 with maxval 1 (values kept) or 255 (thresholded at 128).
BinaryMask read_pgm(std::istream& in);
BinaryMask read_pgm(const std::filesystem::path& path);
/// Binary P5 with maxval 255.
void write_pgm(std::ostream& out, const BinaryMask& mask);
void write_pgm(const std::filesystem::path& path, const BinaryMask& mask);

class LatentEmbedding {
 public:
  virtual ~LatentEmbedding() = default;
  virtual int dim() const = 0;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual Eigen::VectorXd encode(const BinaryMask& mask) const = 0;
  virtual BinaryMask decode(const Eigen::VectorXd& z) const = 0;
};

/// Principal-subspace autoencoder: encode projects the centred, flattened
/// mask on D orthonormal directions; decode back-projects, adds the mean and
/// thresholds at 0.5.
class LinearEmbedding final : public LatentEmbedding {
 public:
  LinearEmbedding() = default;
  LinearEmbedding(int width, int height, Eigen::VectorXd mean, Eigen::MatrixXd components);

  int dim() const override { return static_cast<int>(components_.cols()); }
  int width() const override { return width_; }
  int height() const override { return height_; }
  Eigen::VectorXd encode(const BinaryMask& mask) const override;
  BinaryMask decode(const Eigen::VectorXd& z) const override;

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& components() const noexcept { return components_; }

 private:
  int width_ = 0, height_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;  // pixels x D
};

inline constexpr int kDefaultEmbeddingDim = 32;
/// Latent size used for shape models; see build_manifold.
inline constexpr int kDefaultModelDim = 5;

LinearEmbedding train_embedding(std::span<const BinaryMask> masks, int dim = kDefaultEmbeddingDim);

/// Secondary 8-connected components at or above this fraction of the
/// largest one make a mask invalid.
inline constexpr double kSecondaryAreaFraction = 0.05;

/// False for an empty mask, a background region enclosed by foreground
/// (4-connected, not touching the border), or a secondary foreground
/// component of at least 5% of the largest component's area.
bool shape_valid(const BinaryMask& mask);

struct ManifoldParams {
  std::size_t target_count = 110000;
  std::uint64_t rng_seed = 0;
  double safety = 1.1;
  std::size_t starvation_window = 1000000;
  double min_acceptance = 1e-4;
  double covariance_floor = 1e-6;

  void validate() const;
};

struct ValidManifold {
  Eigen::MatrixXd samples;      // accepted latent vectors, one per row
  Eigen::MatrixXd kde_centers;  // encoded training masks, one per row
  Eigen::VectorXd kde_bandwidth;
  Eigen::VectorXd gaussian_mean;
  Eigen::MatrixXd gaussian_cov;
  double log_k_rs = 0.0;
  std::size_t proposals = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(samples.rows()); }
  int dim() const noexcept { return static_cast<int>(kde_centers.cols()); }
  /// Gaussian-kernel density estimate with diagonal bandwidth.
  double log_kde(const Eigen::VectorXd& z) const;
  double log_gaussian(const Eigen::VectorXd& z) const;
};

/// Rejection sampling of latent vectors: proposals z ~ Q (Gaussian fit of the
/// encoded masks, covariance floored), u ~ U(0, K f_q(z)); z is kept when
/// u < f_p(z) (Scott's-rule KDE) and decode(z) is shape_valid. K is 1.1x the
/// largest f_p/f_q over the training vectors.
ValidManifold build_manifold(const LatentEmbedding& embedding, std::span<const BinaryMask> valid_masks,
                             const ManifoldParams& params);

/// Decodes the mean of the k manifold samples nearest to encode(mask).
BinaryMask repair(const BinaryMask& mask, const LatentEmbedding& embedding, const ValidManifold& manifold, int k = 1);

struct ShapeModel {
  LinearEmbedding embedding;
  ValidManifold manifold;
};

nlohmann::json to_json(const ShapeModel& model);
ShapeModel shape_model_from_json(const nlohmann::json& j);

// Synthetic masks.
BinaryMask ellipse_mask(int width, int height, double cx, double cy, double a, double b, double angle);

/// Population of one structure seen in a fixed view: centre within 1 px of
/// the raster centre, semi-axes 20-35% and 13-25% of the raster side,
/// orientation within 0.5 rad of the x axis.
inline constexpr double kEllipseCentreJitter = 1.0;
inline constexpr double kEllipseAngleSpread = 0.5;
std::vector<BinaryMask> random_ellipses(std::size_t count, int width, int height, std::uint64_t seed);
/// Clears the pixels whose direction from the foreground centroid lies
/// within half_angle of `direction` (radians).
BinaryMask wedge_decay(const BinaryMask& mask, double direction, double half_angle);
/// Wedge decay with seeded direction and a half angle in [25, 40] degrees.
BinaryMask random_wedge_decay(const BinaryMask& mask, std::uint64_t seed);
/// Segmentation-style decay: a random wedge cut, `holes` interior holes of
/// radius 1 px and `fragments` detached blobs of radius 1.5 px at least 4 px
/// away from the original foreground.
inline constexpr int kDecayHoles = 2;
inline constexpr int kDecayFragments = 2;
BinaryMask random_decay(const BinaryMask& mask, std::uint64_t seed, int holes = kDecayHoles,
                        int fragments = kDecayFragments);

}  // namespace costalign::shape
