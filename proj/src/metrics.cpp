#include "cycreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace cycreg {

std::pair<double, std::vector<LandmarkError>> tre(const LandmarkSet& fixed_points,
                                                  const LandmarkSet& moving_points,
                                                  const DisplacementField& field,
                                                  Real3 spacing_mm) {
  validate_unique_ids(fixed_points);
  validate_unique_ids(moving_points);
  if (fixed_points.entries.empty()) {
    throw std::invalid_argument("tre: empty landmark set");
  }
  validate_in_domain(fixed_points, field.dims);
  std::map<std::string, Real3> moving_by_id;
  for (const auto& p : moving_points.entries) moving_by_id[p.id] = p.position;
  if (moving_by_id.size() != fixed_points.entries.size()) {
    throw std::invalid_argument("tre: landmark sets have different sizes");
  }

  std::vector<LandmarkError> per;
  per.reserve(fixed_points.entries.size());
  for (const auto& q : fixed_points.entries) {
    const auto it = moving_by_id.find(q.id);
    if (it == moving_by_id.end()) {
      throw std::invalid_argument("tre: landmark id '" + q.id + "' missing from moving set");
    }
    const Real3 d = sample_field(field, q.position[0], q.position[1], q.position[2]);
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double diff = (q.position[a] + d[a] - it->second[a]) * spacing_mm[a];
      acc += diff * diff;
    }
    per.push_back({q.id, std::sqrt(acc)});
  }
  std::sort(per.begin(), per.end(),
            [](const LandmarkError& x, const LandmarkError& y) { return x.id < y.id; });
  double mean = 0.0;
  for (const auto& e : per) mean += e.tre_mm;
  mean /= double(per.size());
  return {mean, std::move(per)};
}

double nmse(const Volume3D& original, const Volume3D& reconstructed) {
  if (original.dims != reconstructed.dims) {
    throw std::invalid_argument("nmse: dimension mismatch");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < original.data.size(); ++i) {
    const double d = original.data[i] - reconstructed.data[i];
    num += d * d;
    den += original.data[i] * original.data[i];
  }
  if (den == 0.0) throw std::invalid_argument("nmse: original volume has zero energy");
  return num / den;
}

MetricReport evaluate(const Volume3D& a, const Volume3D& b, const RegistrationResult& result,
                      const std::optional<std::pair<LandmarkSet, LandmarkSet>>& landmarks) {
  if (a.dims != b.dims || a.dims != result.phi_ab.dims || a.dims != result.phi_ba.dims) {
    throw std::invalid_argument("evaluate: dimension mismatch");
  }
  MetricReport report;
  report.folding_percent = 100.0 * jacobian_stats(result.phi_ab).nonpositive_fraction;
  report.nmse = nmse(a, warp(warp(a, result.phi_ab), result.phi_ba));
  report.wall_time_s = result.wall_time_s;
  if (landmarks) {
    auto [mean, per] = tre(landmarks->first, landmarks->second, result.phi_ab, a.spacing_mm);
    report.tre_mm = mean;
    report.per_landmark_tre_mm = std::move(per);
  }
  return report;
}

namespace {
std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string metric_report_to_json(const MetricReport& report) {
  std::string out = "{\n";
  if (report.tre_mm) out += "  \"tre_mm\": " + fmt17(*report.tre_mm) + ",\n";
  out += "  \"nmse\": " + fmt17(report.nmse) + ",\n";
  out += "  \"folding_percent\": " + fmt17(report.folding_percent) + ",\n";
  out += "  \"wall_time_s\": " + fmt17(report.wall_time_s);
  if (report.tre_mm) {
    out += ",\n  \"per_landmark_tre_mm\": [";
    for (std::size_t i = 0; i < report.per_landmark_tre_mm.size(); ++i) {
      const auto& e = report.per_landmark_tre_mm[i];
      if (i) out += ",";
      out += "\n    {\"id\": \"" + e.id + "\", \"tre_mm\": " + fmt17(e.tre_mm) + "}";
    }
    out += "\n  ]\n";
  } else {
    out += "\n";
  }
  out += "}\n";
  return out;
}

}  // namespace cycreg
