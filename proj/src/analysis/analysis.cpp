#include "disentlab/analysis/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "disentlab/common/error.hpp"

namespace disentlab::analysis {

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<double> column(const metrics::Representation& z, int j) {
  return std::vector<double>(z.col(j).data(), z.col(j).data() + z.rows());
}

}  // namespace

std::size_t Mask::area() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

Mask Mask::from_image(const Image& image) {
  Mask m{image.height, image.width, std::vector<std::uint8_t>(image.pixel_count(), 0)};
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < image.channels; ++ch) {
        if (image.at(r, c, ch) != 0.0f) {
          m.data[static_cast<std::size_t>(r) * static_cast<std::size_t>(image.width) + static_cast<std::size_t>(c)] = 1;
          break;
        }
      }
    }
  }
  return m;
}

std::vector<Point> convex_hull(std::vector<Point> points) {
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < 3) return points;
  std::vector<Point> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower_end = k + 1; i-- > 0;) {
    while (k >= lower_end && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(std::span<const Point> polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& a = polygon[i];
    const auto& b = polygon[(i + 1) % polygon.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2.0;
}

HandcraftedFeatures handcrafted(const Image& image, const Mask& mask) {
  if (mask.height != image.height || mask.width != image.width) {
    throw ValidationError("mask is " + std::to_string(mask.height) + "x" + std::to_string(mask.width) + ", image is " +
                          std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  HandcraftedFeatures f;
  f.mean_color.assign(static_cast<std::size_t>(image.channels), 0.0);
  // The hull of all pixel corners equals the hull of each row's extreme pixels.
  std::vector<Point> corners;
  for (int r = 0; r < mask.height; ++r) {
    int first = -1;
    int last = -1;
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      if (first < 0) first = c;
      last = c;
      f.area += 1.0;
      for (int ch = 0; ch < image.channels; ++ch) f.mean_color[static_cast<std::size_t>(ch)] += image.at(r, c, ch);
    }
    if (first < 0) continue;
    for (const int c : {first, last + 1}) {
      corners.push_back({static_cast<double>(c), static_cast<double>(r)});
      corners.push_back({static_cast<double>(c), static_cast<double>(r + 1)});
    }
  }
  if (f.area == 0.0) throw ValidationError("mask has no foreground pixels");
  for (auto& v : f.mean_color) v /= f.area;
  const auto hull = convex_hull(std::move(corners));
  f.solidity = f.area / polygon_area(hull);
  return f;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson needs equal-length series");
  if (x.size() < 3) throw ValidationError("pearson needs at least 3 points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<int> dim_for_factor(std::span<const metrics::DimensionLabel> labels, const std::string& factor) {
  std::optional<int> best;
  const auto want = lower(factor);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (lower(labels[j].factor) != want) continue;
    if (!best || labels[j].confidence > labels[static_cast<std::size_t>(*best)].confidence) best = static_cast<int>(j);
  }
  return best;
}

std::vector<Correlation> correlate(std::span<const HandcraftedFeatures> features, const metrics::Representation& z,
                                   std::span<const metrics::DimensionLabel> labels) {
  if (static_cast<Eigen::Index>(features.size()) != z.rows()) throw ValidationError("feature and representation rows differ");
  if (static_cast<Eigen::Index>(labels.size()) != z.cols()) throw ValidationError("one label per latent dim is required");
  if (features.empty()) throw ValidationError("no samples to correlate");
  std::vector<std::pair<std::string, std::string>> pairs{{"area", "Scale"}};
  for (std::size_t c = 0; c < features.front().mean_color.size(); ++c) {
    pairs.emplace_back("mean_color_" + std::to_string(c), "Color");
  }
  pairs.emplace_back("solidity", "Shape");

  std::vector<Correlation> out;
  for (const auto& [feature, factor] : pairs) {
    Correlation c{feature, factor, -1, std::nullopt, {}};
    std::vector<double> series;
    for (const auto& f : features) {
      if (feature == "area") {
        series.push_back(f.area);
      } else if (feature == "solidity") {
        series.push_back(f.solidity);
      } else {
        series.push_back(f.mean_color.at(std::stoul(feature.substr(11))));
      }
    }
    const auto dim = dim_for_factor(labels, factor);
    if (!dim) {
      c.note = "no dimension labeled " + factor;
    } else {
      c.dim = *dim;
      c.r = pearson(series, column(z, *dim));
      if (!c.r) c.note = "undefined: zero variance";
    }
    out.push_back(std::move(c));
  }
  return out;
}

OpenSetReport openset(const metrics::Representation& train, std::span<const int> train_y,
                      const metrics::Representation& anomalies, std::span<const int> anomaly_predictions,
                      std::span<const std::string> dim_labels) {
  if (static_cast<std::size_t>(train.rows()) != train_y.size()) throw ValidationError("training rows and labels differ");
  if (anomalies.rows() == 0) throw ValidationError("no anomaly samples");
  if (static_cast<std::size_t>(anomalies.rows()) != anomaly_predictions.size()) {
    throw ValidationError("anomaly rows and predictions differ");
  }
  if (anomalies.cols() != train.cols()) throw ValidationError("anomaly and training dims differ");
  if (!dim_labels.empty() && static_cast<Eigen::Index>(dim_labels.size()) != train.cols()) {
    throw ValidationError("one label per dim is required");
  }
  OpenSetReport r;
  int classes = 0;
  for (const int y : train_y) classes = std::max(classes, y + 1);
  r.votes.assign(static_cast<std::size_t>(classes), 0);
  for (const int p : anomaly_predictions) {
    if (p < 0 || p >= classes) throw ValidationError("anomaly prediction " + std::to_string(p) + " is not a training class");
    ++r.votes[static_cast<std::size_t>(p)];
  }
  const auto top = std::max_element(r.votes.begin(), r.votes.end());
  r.predicted_class = static_cast<int>(top - r.votes.begin());
  r.tied = std::count(r.votes.begin(), r.votes.end(), *top) > 1;

  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(train.cols());
  std::size_t members = 0;
  for (std::size_t i = 0; i < train_y.size(); ++i) {
    if (train_y[i] != r.predicted_class) continue;
    centroid += train.row(static_cast<Eigen::Index>(i)).transpose();
    ++members;
  }
  centroid /= static_cast<double>(members);
  const Eigen::VectorXd anomaly_mean = anomalies.colwise().mean().transpose();
  r.distance.resize(static_cast<std::size_t>(train.cols()));
  for (Eigen::Index j = 0; j < train.cols(); ++j) r.distance[static_cast<std::size_t>(j)] = std::abs(anomaly_mean(j) - centroid(j));
  r.ranking.resize(r.distance.size());
  std::iota(r.ranking.begin(), r.ranking.end(), 0);
  std::stable_sort(r.ranking.begin(), r.ranking.end(), [&](int a, int b) {
    return r.distance[static_cast<std::size_t>(a)] > r.distance[static_cast<std::size_t>(b)];
  });
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    r.labels.push_back(dim_labels.empty() ? "dim_" + std::to_string(j) : dim_labels[static_cast<std::size_t>(j)]);
  }
  return r;
}

OpenSetReport openset_gbt(const metrics::Representation& train, std::span<const int> train_y,
                          const metrics::Representation& anomalies, std::span<const std::string> dim_labels,
                          const trees::GbtSettings& settings) {
  const auto model = trees::fit_gbt(train, train_y, settings);
  const auto pred = trees::predict(model, anomalies);
  return openset(train, train_y, anomalies, pred.labels, dim_labels);
}

std::string ScatterTable::to_csv() const {
  std::ostringstream out;
  out << "x,y,class\n";
  out << "# x=" << x_name << " y=" << y_name << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) out << shortest(x[i]) << ',' << shortest(y[i]) << ',' << cls[i] << '\n';
  return out.str();
}

ScatterTable ScatterTable::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "x,y,class") throw ValidationError("scatter table must start with x,y,class");
  ScatterTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto xs = line.find("x=");
      const auto ys = line.find(" y=");
      if (xs != std::string::npos && ys != std::string::npos) {
        t.x_name = line.substr(xs + 2, ys - xs - 2);
        t.y_name = line.substr(ys + 3);
      }
      continue;
    }
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw ValidationError("malformed scatter row: " + line);
    double vx = 0.0;
    double vy = 0.0;
    const auto rx = std::from_chars(line.data(), line.data() + a, vx);
    const auto ry = std::from_chars(line.data() + a + 1, line.data() + b, vy);
    if (rx.ec != std::errc() || ry.ec != std::errc()) throw ValidationError("malformed scatter row: " + line);
    t.x.push_back(vx);
    t.y.push_back(vy);
    t.cls.push_back(line.substr(b + 1));
  }
  return t;
}

std::string ScatterTable::to_svg(int size) const {
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::map<std::string, std::size_t> color_of;
  for (const auto& c : cls) color_of.emplace(c, 0);
  std::size_t next = 0;
  for (auto& [name, idx] : color_of) idx = next++ % std::size(kColors);
  const double margin = 40.0;
  const double span = size - 2.0 * margin;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!x.empty()) {
    std::tie(x0, x1) = std::pair{*std::min_element(x.begin(), x.end()), *std::max_element(x.begin(), x.end())};
    std::tie(y0, y1) = std::pair{*std::min_element(y.begin(), y.end()), *std::max_element(y.begin(), y.end())};
  }
  const auto sx = [&](double v) { return margin + (x1 > x0 ? (v - x0) / (x1 - x0) : 0.5) * span; };
  const auto sy = [&](double v) { return size - margin - (y1 > y0 ? (v - y0) / (y1 - y0) : 0.5) * span; };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << size / 2 << "\" y=\"" << size - 8 << "\" text-anchor=\"middle\" font-size=\"12\">" << x_name << "</text>\n";
  out << "<text x=\"12\" y=\"" << size / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << size / 2
      << ")\" text-anchor=\"middle\">" << y_name << "</text>\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    out << "<circle cx=\"" << sx(x[i]) << "\" cy=\"" << sy(y[i]) << "\" r=\"2.5\" fill=\"" << kColors[color_of[cls[i]]]
        << "\"/>\n";
  }
  double ly = margin;
  for (const auto& [name, idx] : color_of) {
    out << "<circle cx=\"" << size - margin << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << kColors[idx] << "\"/>";
    out << "<text x=\"" << size - margin - 8 << "\" y=\"" << ly + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << name
        << "</text>\n";
    ly += 16.0;
  }
  out << "</svg>\n";
  return out.str();
}

ScatterTable export_scatter(const metrics::Representation& z, std::span<const std::string> classes, int dim_x, int dim_y,
                            std::string x_name, std::string y_name) {
  if (dim_x == dim_y) throw ValidationError("scatter needs two different dims, got " + std::to_string(dim_x) + " twice");
  for (const int d : {dim_x, dim_y}) {
    if (d < 0 || d >= z.cols()) throw ValidationError("scatter dim " + std::to_string(d) + " is out of range");
  }
  if (static_cast<Eigen::Index>(classes.size()) != z.rows()) throw ValidationError("one class per row is required");
  ScatterTable t;
  t.x_name = x_name.empty() ? "dim_" + std::to_string(dim_x) : std::move(x_name);
  t.y_name = y_name.empty() ? "dim_" + std::to_string(dim_y) : std::move(y_name);
  t.x = column(z, dim_x);
  t.y = column(z, dim_y);
  t.cls.assign(classes.begin(), classes.end());
  for (const auto& c : t.cls) {
    if (c.find_first_of(",\n") != std::string::npos) throw ValidationError("class names may not contain commas or newlines");
  }
  return t;
}

}  // namespace disentlab::analysis
