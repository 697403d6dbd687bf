#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "disentlab/analysis/analysis.hpp"
#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"

using namespace disentlab;
using analysis::Mask;
using analysis::Point;

namespace {

Mask blank(int h, int w) { return Mask{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0)}; }

void fill(Mask& m, int r0, int c0, int r1, int c1) {
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) m.data[static_cast<std::size_t>(r) * static_cast<std::size_t>(m.width) + static_cast<std::size_t>(c)] = 1;
  }
}

Image image_of(const Mask& m) {
  Image img(m.height, m.width, 3);
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (m.at(r, c)) {
        img.at(r, c, 0) = 0.5f;
        img.at(r, c, 2) = 1.0f;
      }
    }
  }
  return img;
}

// Hull area from every directed edge that keeps all points on its left or
// within the edge itself; O(n^3) over all pixel corners.
double brute_force_hull_area(const Mask& m) {
  std::vector<Point> pts;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      for (const auto& [dx, dy] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
        const Point p{static_cast<double>(c + dx), static_cast<double>(r + dy)};
        if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
      }
    }
  }
  double twice = 0.0;
  for (const auto& a : pts) {
    for (const auto& b : pts) {
      if (a == b) continue;
      bool supporting = true;
      for (const auto& p : pts) {
        const double cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (cr < 0.0) {
          supporting = false;
          break;
        }
        if (cr == 0.0) {
          const double t = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
          const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
          if (t < 0.0 || t > len2) {
            supporting = false;
            break;
          }
        }
      }
      if (supporting) twice += a.x * b.y - b.x * a.y;
    }
  }
  return std::abs(twice) / 2.0;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("hull of a square with interior and collinear points") {
    std::vector<Point> pts{{0, 0}, {2, 0}, {1, 0}, {2, 2}, {0, 2}, {1, 1}, {0, 1}};
    const auto hull = analysis::convex_hull(pts);
    CHECK(hull.size() == 4);
    CHECK(analysis::polygon_area(hull) == 4.0);
  }

  TEST_CASE("shoelace area of a triangle and a degenerate polygon") {
    const std::vector<Point> tri{{0, 0}, {4, 0}, {0, 3}};
    CHECK(analysis::polygon_area(tri) == 6.0);
    const std::vector<Point> line{{0, 0}, {1, 1}};
    CHECK(analysis::polygon_area(line) == 0.0);
  }

  TEST_CASE("rectangles have solidity one") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      auto m = blank(40, 40);
      const int r0 = static_cast<int>(rng.uniform_index(20));
      const int c0 = static_cast<int>(rng.uniform_index(20));
      const int r1 = r0 + 1 + static_cast<int>(rng.uniform_index(20));
      const int c1 = c0 + 1 + static_cast<int>(rng.uniform_index(20));
      fill(m, r0, c0, r1, c1);
      const auto f = analysis::handcrafted(image_of(m), m);
      CHECK(std::abs(f.solidity - 1.0) < 1e-6);
      CHECK(f.area == static_cast<double>((r1 - r0) * (c1 - c0)));
    }
  }

  TEST_CASE("plus shape matches the brute-force hull") {
    auto m = blank(24, 24);
    fill(m, 2, 9, 21, 14);
    fill(m, 9, 3, 14, 20);
    const auto f = analysis::handcrafted(image_of(m), m);
    const double oracle = static_cast<double>(m.area()) / brute_force_hull_area(m);
    CHECK(std::abs(f.solidity - oracle) < 1e-9);
    CHECK(f.solidity < 0.8);
  }

  TEST_CASE("random masks match the brute-force hull") {
    Rng rng(10);
    for (int trial = 0; trial < 10; ++trial) {
      auto m = blank(10, 12);
      for (auto& v : m.data) v = rng.uniform01() < 0.3 ? 1 : 0;
      if (m.area() == 0) continue;
      const auto f = analysis::handcrafted(image_of(m), m);
      CHECK(std::abs(f.solidity - static_cast<double>(m.area()) / brute_force_hull_area(m)) < 1e-9);
    }
  }

  TEST_CASE("mean color is averaged over the foreground only") {
    auto m = blank(4, 4);
    fill(m, 0, 0, 2, 2);
    const auto f = analysis::handcrafted(image_of(m), m);
    CHECK(f.mean_color == std::vector<double>{0.5, 0.0, 1.0});
    CHECK_THROWS_AS(analysis::handcrafted(image_of(m), blank(4, 4)), ValidationError);
  }

  TEST_CASE("pearson oracle") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> y{2, 1, 4, 3, 7};
    // Means 3 and 3.4; sxy = 12, sxx = 10, syy = 21.2.
    CHECK(std::abs(*analysis::pearson(x, y) - 12.0 / std::sqrt(10.0 * 21.2)) < 1e-12);
    const std::vector<double> neg{5, 4, 3, 2, 1};
    CHECK(*analysis::pearson(x, neg) == doctest::Approx(-1.0));
    const std::vector<double> flat{1, 1, 1, 1, 1};
    CHECK_FALSE(analysis::pearson(x, flat).has_value());
  }

  TEST_CASE("correlate pairs features with labeled dims") {
    std::vector<analysis::HandcraftedFeatures> feats;
    metrics::Representation z(6, 3);
    for (int i = 0; i < 6; ++i) {
      feats.push_back({static_cast<double>(10 + i), {0.1 * i, 0.2, 0.3}, 1.0 - 0.05 * (i % 3)});
      z(i, 0) = -i;
      z(i, 1) = i % 3;
      z(i, 2) = 0.5 * i;
    }
    const std::vector<metrics::DimensionLabel> labels{{"Scale", 0.4}, {"Shape", 0.9}, {"scale", 0.8}};
    const auto c = analysis::correlate(feats, z, labels);
    REQUIRE(c.size() == 5);
    CHECK(c[0].feature == "area");
    CHECK(c[0].dim == 2);
    CHECK(*c[0].r == doctest::Approx(1.0));
    CHECK(c[1].dim == -1);
    CHECK_FALSE(c[1].note.empty());
    CHECK(c[4].feature == "solidity");
    CHECK(c[4].dim == 1);
    CHECK(*c[4].r == doctest::Approx(-1.0));
  }

  TEST_CASE("open-set distances use the majority predicted class") {
    metrics::Representation train(4, 3);
    train << 0, 0, 0,
             0, 2, 0,
             5, 5, 5,
             5, 5, 5;
    const std::vector<int> y{0, 0, 1, 1};
    metrics::Representation anomalies(3, 3);
    anomalies << 3, 1, 0.5,
                 3, 1, 0.5,
                 3, 1, 0.5;
    const std::vector<std::string> labels{"Shape", "Color", "Scale"};
    const auto r = analysis::openset(train, y, anomalies, std::vector<int>{0, 0, 1}, labels);
    CHECK(r.predicted_class == 0);
    CHECK_FALSE(r.tied);
    CHECK(r.distance == std::vector<double>{3.0, 0.0, 0.5});
    CHECK(r.ranking == std::vector<int>{0, 2, 1});
    CHECK(r.labels[static_cast<std::size_t>(r.ranking[0])] == "Shape");

    const auto tie = analysis::openset(train, y, anomalies, std::vector<int>{0, 1, 1}, labels);
    CHECK(tie.predicted_class == 1);
    CHECK(analysis::openset(train, y, anomalies.topRows(2), std::vector<int>{0, 1}, labels).tied);
  }

  TEST_CASE("distance ties rank by dim index") {
    metrics::Representation train = metrics::Representation::Zero(2, 3);
    metrics::Representation anomalies(1, 3);
    anomalies << 1, 2, 2;
    const auto r = analysis::openset(train, std::vector<int>{0, 0}, anomalies, std::vector<int>{0}, {});
    CHECK(r.ranking == std::vector<int>{1, 2, 0});
    CHECK(r.labels[0] == "dim_0");
  }

  TEST_CASE("scatter CSV parses back exactly") {
    Rng rng(12);
    metrics::Representation z(50, 4);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal() * std::pow(10.0, static_cast<double>(rng.uniform_index(20)) - 10.0);
    }
    std::vector<std::string> cls;
    for (int i = 0; i < 50; ++i) cls.push_back(i % 2 ? "cat" : "dog");
    const auto t = analysis::export_scatter(z, cls, 3, 1, "Shape", "Color");
    const auto back = analysis::ScatterTable::parse_csv(t.to_csv());
    CHECK(back.x == t.x);
    CHECK(back.y == t.y);
    CHECK(back.cls == cls);
    CHECK(back.x_name == "Shape");
    CHECK(back.y_name == "Color");
    for (int i = 0; i < 50; ++i) CHECK(back.x[static_cast<std::size_t>(i)] == z(i, 3));
    const auto svg = t.to_svg();
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("cat") != std::string::npos);
  }

  TEST_CASE("scatter rejects the same dim twice and bad indices") {
    metrics::Representation z = metrics::Representation::Zero(2, 3);
    const std::vector<std::string> cls{"a", "b"};
    CHECK_THROWS_AS(analysis::export_scatter(z, cls, 1, 1), ValidationError);
    CHECK_THROWS_AS(analysis::export_scatter(z, cls, 0, 3), ValidationError);
    const std::vector<std::string> bad{"a,b", "c"};
    CHECK_THROWS_AS(analysis::export_scatter(z, bad, 0, 1), ValidationError);
  }
}
