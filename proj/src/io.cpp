#include "promp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "promp/errors.hpp"

namespace promp::io {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Demonstration build_demo(std::vector<double> times, const std::vector<std::vector<double>>& rows,
                         const std::string& where) {
  if (rows.size() < 2) throw InputError(where + ": a demonstration needs at least two samples");
  const auto D = rows.front().size();
  if (D == 0) throw DimensionError(where + ": no joint columns");
  Eigen::MatrixXd q(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(D));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != D)
      throw DimensionError(where + ": sample " + std::to_string(i) + " has " +
                           std::to_string(rows[i].size()) + " joints, expected " + std::to_string(D));
    for (std::size_t j = 0; j < D; ++j)
      q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw TimeOrderError(where + ": time " + std::to_string(times[i]) + " at sample " +
                           std::to_string(i) + " does not increase");
  auto demo = Demonstration::from_samples(std::move(times), std::move(q));
  demo.validate();
  return demo;
}

void check_consistent(const std::vector<Demonstration>& demos) {
  for (std::size_t i = 1; i < demos.size(); ++i)
    if (demos[i].dofs() != demos[0].dofs())
      throw DimensionError("demo " + std::to_string(i) + " has D=" + std::to_string(demos[i].dofs()) +
                           ", demo 0 has D=" + std::to_string(demos[0].dofs()));
}

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InputError(what + " must be a non-empty array of rows");
  const auto cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw DimensionError(what + ": row " + std::to_string(i) + " has the wrong length");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

Demonstration parse_demo_csv(std::string_view text) {
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  std::size_t header_cols = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line = trim(text.substr(pos, nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line);
    if (header_cols == 0) {
      if (fields.size() < 2 || fields[0] != "t")
        throw ParseError("CSV header must be t,q0,...", line_no, 1);
      header_cols = fields.size();
      continue;
    }
    if (fields.size() != header_cols)
      throw DimensionError("line " + std::to_string(line_no) + " has " +
                           std::to_string(fields.size() - 1) + " joints, header has " +
                           std::to_string(header_cols - 1));
    std::vector<double> row;
    int column = 1;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      double v = 0.0;
      const auto* b = fields[f].data();
      const auto* e = b + fields[f].size();
      const auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || ptr != e || fields[f].empty())
        throw ParseError("cannot read number '" + std::string(fields[f]) + "'", line_no, column);
      if (!std::isfinite(v)) throw ParseError("non-finite value", line_no, column);
      if (f == 0)
        times.push_back(v);
      else
        row.push_back(v);
      column += static_cast<int>(fields[f].size()) + 1;
    }
    rows.push_back(std::move(row));
  }
  if (header_cols == 0) throw ParseError("empty CSV file", line_no, 1);
  return build_demo(std::move(times), rows, "CSV demo");
}

std::vector<Demonstration> parse_demos_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(e.what(), line, col);
  }
  const json& arr = doc.is_object() && doc.contains("demos") ? doc["demos"] : doc;
  if (!arr.is_array()) throw ParseError("expected an array of demonstrations", 1, 1);
  std::vector<Demonstration> out;
  for (std::size_t d = 0; d < arr.size(); ++d) {
    const std::string where = "demo " + std::to_string(d);
    const json& item = arr[d];
    if (!item.is_object() || !item.contains("t") || !item.contains("q"))
      throw ParseError(where + " needs fields 't' and 'q'", 1, 1);
    try {
      auto times = item["t"].get<std::vector<double>>();
      auto rows = item["q"].get<std::vector<std::vector<double>>>();
      if (times.size() != rows.size())
        throw DimensionError(where + ": " + std::to_string(times.size()) + " times but " +
                             std::to_string(rows.size()) + " samples");
      out.push_back(build_demo(std::move(times), rows, where));
      if (item.contains("t0")) out.back().t0 = item["t0"].get<double>();
      if (item.contains("duration")) out.back().duration = item["duration"].get<double>();
      out.back().validate();
    } catch (const json::type_error& e) {
      throw ParseError(where + ": " + e.what(), 1, 1);
    }
  }
  check_consistent(out);
  return out;
}

std::vector<Demonstration> load_demos(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".csv") return {parse_demo_csv(text)};
  return parse_demos_json(text);
}

std::vector<Demonstration> load_demos(std::span<const std::filesystem::path> paths) {
  std::vector<Demonstration> out;
  for (const auto& p : paths) {
    auto part = load_demos(p);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  check_consistent(out);
  return out;
}

json demos_to_json(std::span<const Demonstration> demos) {
  json arr = json::array();
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const auto& demo = demos[d];
    arr.push_back({{"id", "demo" + std::to_string(d)},
                   {"t", demo.times},
                   {"q", matrix_json(demo.joints)},
                   {"t0", demo.t0},
                   {"duration", demo.duration}});
  }
  return arr;
}

void save_demos(const std::filesystem::path& path, std::span<const Demonstration> demos) {
  write_file(path, demos_to_json(demos).dump(1) + "\n");
}

json model_to_json(const ProMP& p) {
  return {{"format_version", 1},
          {"D", p.dofs},
          {"basis",
           {{"rbf_centers", p.basis.rbf_centers},
            {"rbf_width", p.basis.rbf_width},
            {"poly_degree", p.basis.poly_degree}}},
          {"mu_w", std::vector<double>(p.mu_w.data(), p.mu_w.data() + p.mu_w.size())},
          {"Sigma_w", matrix_json(p.Sigma_w)},
          {"Sigma_y", matrix_json(p.Sigma_y)}};
}

ProMP model_from_json(const json& j) {
  try {
    if (j.value("format_version", 0) != 1) throw InputError("unsupported model format_version");
    ProMP p;
    p.dofs = j.at("D").get<int>();
    const auto& b = j.at("basis");
    p.basis.rbf_centers = b.at("rbf_centers").get<std::vector<double>>();
    p.basis.rbf_width = b.at("rbf_width").get<double>();
    p.basis.poly_degree = b.at("poly_degree").get<int>();
    p.basis.validate();
    const auto mu = j.at("mu_w").get<std::vector<double>>();
    p.mu_w = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    p.Sigma_w = matrix_from(j.at("Sigma_w"), "Sigma_w");
    p.Sigma_y = matrix_from(j.at("Sigma_y"), "Sigma_y");
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ProMP& p) {
  write_file(path, model_to_json(p).dump(1) + "\n");
}

ProMP load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(e.what(), line, col);
  }
  return model_from_json(j);
}

std::vector<double> normalize_phase(const Demonstration& demo) {
  if (!(demo.duration > 0.0)) throw InputError("phase normalization needs a positive duration");
  std::vector<double> z;
  z.reserve(demo.times.size());
  for (double t : demo.times) z.push_back((t - demo.t0) / demo.duration);
  return z;
}

Eigen::VectorXd joint_speed(const Demonstration& demo, int smoothing) {
  const int n = demo.num_samples();
  if (n < 2) throw InputError("speed needs at least two samples");
  if (smoothing < 1) throw InputError("smoothing width must be positive");
  const auto& t = demo.times;
  Eigen::VectorXd speed(n);
  for (int i = 0; i < n; ++i) {
    const int a = std::max(i - 1, 0), b = std::min(i + 1, n - 1);
    const double dt = t[static_cast<std::size_t>(b)] - t[static_cast<std::size_t>(a)];
    speed[i] = ((demo.joints.row(b) - demo.joints.row(a)) / dt).norm();
  }
  if (smoothing == 1) return speed;
  Eigen::VectorXd out(n);
  const int half = smoothing / 2;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    out[i] = speed.segment(lo, hi - lo + 1).mean();
  }
  return out;
}

SegmentReport segment_strikes(const Demonstration& demo, std::span<const double> hit_times,
                              const SegmentOptions& opts) {
  SegmentReport rep;
  const Eigen::VectorXd speed = joint_speed(demo, opts.smoothing);
  const double threshold = opts.zero_fraction * speed.maxCoeff();
  const auto& t = demo.times;
  const int n = demo.num_samples();

  std::vector<double> hits(hit_times.begin(), hit_times.end());
  std::sort(hits.begin(), hits.end());
  double last_end = -std::numeric_limits<double>::infinity();
  for (double th : hits) {
    auto drop = [&](const std::string& why) {
      rep.dropped.push_back(th);
      rep.messages.push_back("hit at t=" + std::to_string(th) + " dropped: " + why);
    };
    if (th <= t.front() || th >= t.back()) {
      drop("outside the recording");
      continue;
    }
    int a = -1, b = -1;
    for (int i = 0; i < n && t[static_cast<std::size_t>(i)] < th; ++i)
      if (speed[i] < threshold) a = i;
    for (int i = n - 1; i >= 0 && t[static_cast<std::size_t>(i)] > th; --i)
      if (speed[i] < threshold) b = i;
    if (a < 0 || b < 0) {
      drop("no zero-velocity point on both sides");
      continue;
    }
    if (t[static_cast<std::size_t>(a)] <= last_end) {
      drop("overlaps the previous segment");
      continue;
    }
    std::vector<double> times(t.begin() + a, t.begin() + b + 1);
    rep.segments.push_back(
        Demonstration::from_samples(std::move(times), demo.joints.middleRows(a, b - a + 1)));
    rep.hit_times.push_back(th);
    last_end = t[static_cast<std::size_t>(b)];
  }
  return rep;
}

void require_segments(const SegmentReport& report, int min_segments) {
  if (static_cast<int>(report.segments.size()) < min_segments)
    throw InputError("only " + std::to_string(report.segments.size()) +
                     " strike segments survived, at least " + std::to_string(min_segments) +
                     " are needed; record more demonstrations and retry");
}

}  // namespace promp::io
