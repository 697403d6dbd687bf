#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disentlab/io/image.hpp"
#include "disentlab/metrics/metrics.hpp"
#include "disentlab/trees/gbt.hpp"

namespace disentlab::analysis {

struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // row-major, nonzero = foreground

  bool at(int r, int c) const { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)] != 0; }
  std::size_t area() const;
  // Foreground wherever any channel of `image` is nonzero.
  static Mask from_image(const Image& image);
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear points. Fewer than three distinct points come back as-is.
std::vector<Point> convex_hull(std::vector<Point> points);

/// Absolute polygon area by the shoelace formula.
double polygon_area(std::span<const Point> polygon);

struct HandcraftedFeatures {
  double area = 0.0;                // foreground pixel count
  std::vector<double> mean_color;   // per channel over the foreground
  double solidity = 0.0;            // area / hull area, hull over pixel corners
};

HandcraftedFeatures handcrafted(const Image& image, const Mask& mask);

/// Pearson correlation; nullopt when either series has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct Correlation {
  std::string feature;   // area, mean_color_<c>, solidity
  std::string factor;    // factor the feature is paired with
  int dim = -1;          // latent dim carrying that factor label; -1 if none
  std::optional<double> r;
  std::string note;
};

/// Pairs Scale with area, Color with each mean channel and Shape with
/// solidity, correlating each feature with the dim labeled by its factor
/// (highest label confidence when several dims share it).
std::vector<Correlation> correlate(std::span<const HandcraftedFeatures> features, const metrics::Representation& z,
                                   std::span<const metrics::DimensionLabel> labels);

/// Dim carrying `factor` (case-insensitive) with the highest confidence.
std::optional<int> dim_for_factor(std::span<const metrics::DimensionLabel> labels, const std::string& factor);

struct OpenSetReport {
  int predicted_class = -1;
  std::vector<std::size_t> votes;  // anomaly predictions per class
  bool tied = false;               // several classes share the top vote
  std::vector<double> distance;    // per dim
  std::vector<int> ranking;        // dims by descending distance, ties by index
  std::vector<std::string> labels; // per dim
};

/// Distances between the anomaly mean and the centroid of the majority
/// predicted class, computed on the training representation.
OpenSetReport openset(const metrics::Representation& train, std::span<const int> train_y,
                      const metrics::Representation& anomalies, std::span<const int> anomaly_predictions,
                      std::span<const std::string> dim_labels);

/// As above with anomaly predictions from a GBT fitted on the training rows.
OpenSetReport openset_gbt(const metrics::Representation& train, std::span<const int> train_y,
                          const metrics::Representation& anomalies, std::span<const std::string> dim_labels,
                          const trees::GbtSettings& settings = {});

struct ScatterTable {
  std::string x_name;
  std::string y_name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::string> cls;

  std::string to_csv() const;
  static ScatterTable parse_csv(const std::string& text);
  std::string to_svg(int size = 480) const;
};

ScatterTable export_scatter(const metrics::Representation& z, std::span<const std::string> classes, int dim_x, int dim_y,
                            std::string x_name = {}, std::string y_name = {});

}  // namespace disentlab::analysis
