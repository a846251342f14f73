#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promp/model.hpp"

namespace promp::io {

/// CSV with header `t,q0,...,q{D-1}` (one demo) or a JSON array of
/// {"t": [...], "q": [[...], ...]} objects; chosen by extension, anything
/// other than .csv is read as JSON. Every demo is validated and all must
/// share D. ParseError / DimensionError / TimeOrderError on bad input.
std::vector<Demonstration> load_demos(const std::filesystem::path& path);
/// Several paths; D must agree across files.
std::vector<Demonstration> load_demos(std::span<const std::filesystem::path> paths);

Demonstration parse_demo_csv(std::string_view text);
std::vector<Demonstration> parse_demos_json(std::string_view text);

nlohmann::json demos_to_json(std::span<const Demonstration> demos);
void save_demos(const std::filesystem::path& path, std::span<const Demonstration> demos);

nlohmann::json model_to_json(const ProMP& p);
ProMP model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const ProMP& p);
ProMP load_model(const std::filesystem::path& path);

/// (t_i - t0) / T for the demo's own t0 and duration.
std::vector<double> normalize_phase(const Demonstration& demo);

/// Norm of the joint velocity per sample: central differences inside,
/// one-sided at the ends, then a centered moving average of `smoothing`
/// samples (1 = none).
Eigen::VectorXd joint_speed(const Demonstration& demo, int smoothing = 1);

struct SegmentOptions {
  double zero_fraction = 0.01;  // speed below this share of the peak counts as zero
  int smoothing = 1;
};

struct SegmentReport {
  std::vector<Demonstration> segments;
  std::vector<double> hit_times;  // of the kept segments
  std::vector<double> dropped;    // hit times that could not be bracketed
  std::vector<std::string> messages;
};

/// For every hit time, the samples between the nearest zero-speed sample
/// before it and the nearest after it. Each kept segment holds its hit time
/// strictly inside; segments from one demo never overlap.
SegmentReport segment_strikes(const Demonstration& demo, std::span<const double> hit_times,
                              const SegmentOptions& opts = {});

/// Throws InputError asking for more recordings when fewer than
/// `min_segments` segments survived.
void require_segments(const SegmentReport& report, int min_segments = 6);

}  // namespace promp::io
