#include "elearn/systems/trajectory_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace elearn {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error("csv line " + std::to_string(line) + ": " + what);
}

long long parse_int(std::string_view s, std::size_t line, const char* field) {
  s = trim(s);
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    fail(line, std::string("malformed ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) fail(line, "malformed value '" + tmp + "'");
  if (!std::isfinite(v)) fail(line, "non-finite value '" + tmp + "'");
  return v;
}

}  // namespace

std::string trajectories_csv(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw Error("write csv: no trajectories");
  const bool discrete = trajs.front().kind == StateKind::Discrete;
  const std::size_t dim = trajs.front().dim;
  std::string out = "traj_id,t";
  if (discrete) {
    out += ",genotype";
  } else {
    for (std::size_t d = 0; d < dim; ++d) out += ",x" + std::to_string(d);
  }
  out += '\n';
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& tr = trajs[i];
    if ((tr.kind == StateKind::Discrete) != discrete || tr.dim != dim) {
      throw Error("write csv: trajectories mix state kinds or dimensions");
    }
    for (std::size_t t = 0; t < tr.length(); ++t) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(t);
      if (discrete) {
        out += ',';
        out += std::to_string(tr.codes[t]);
      } else {
        for (double v : tr.state(t)) {
          out += ',';
          append_double(out, v);
        }
      }
      out += '\n';
    }
  }
  return out;
}

void write_trajectories_csv(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
  const std::string text = trajectories_csv(trajs);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

std::vector<Trajectory> parse_trajectories_csv(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  bool have_header = false;
  std::vector<Trajectory> out;
  long long current_id = -1;
  long long expected_t = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view lv = trim(line);
    if (lv.empty()) continue;
    const auto fields = split_fields(lv);
    if (!have_header) {
      if (fields.size() < 3 || trim(fields[0]) != "traj_id" || trim(fields[1]) != "t") {
        fail(lineno, "expected header starting with 'traj_id,t'");
      }
      if (schema.kind == StateKind::Discrete) {
        if (fields.size() != 3 || trim(fields[2]) != "genotype") {
          fail(lineno, "discrete schema expects header 'traj_id,t,genotype'");
        }
        dim = 1;
      } else {
        dim = fields.size() - 2;
        for (std::size_t d = 0; d < dim; ++d) {
          if (trim(fields[2 + d]) != "x" + std::to_string(d)) {
            fail(lineno, "expected column 'x" + std::to_string(d) + "'");
          }
        }
      }
      have_header = true;
      continue;
    }
    if (fields.size() != dim + 2) {
      fail(lineno, "expected " + std::to_string(dim + 2) + " fields, found " + std::to_string(fields.size()));
    }
    const long long id = parse_int(fields[0], lineno, "traj_id");
    const long long t = parse_int(fields[1], lineno, "t");
    if (id != current_id) {
      if (id < current_id) fail(lineno, "rows not sorted by traj_id");
      Trajectory tr;
      tr.kind = schema.kind;
      tr.dim = dim;
      tr.lag_time = schema.lag_time;
      tr.system_id = schema.system_id;
      tr.state_space_size = schema.state_space_size;
      out.push_back(std::move(tr));
      current_id = id;
      expected_t = 0;
    }
    if (t != expected_t) fail(lineno, "expected t = " + std::to_string(expected_t) + ", found " + std::to_string(t));
    ++expected_t;
    Trajectory& tr = out.back();
    if (schema.kind == StateKind::Discrete) {
      const long long g = parse_int(fields[2], lineno, "genotype");
      if (g < 0 || static_cast<std::size_t>(g) >= schema.state_space_size) {
        fail(lineno, "genotype " + std::to_string(g) + " outside [0, " +
                         std::to_string(schema.state_space_size) + ")");
      }
      tr.codes.push_back(g);
    } else {
      for (std::size_t d = 0; d < dim; ++d) tr.values.push_back(parse_double(fields[2 + d], lineno));
    }
  }
  if (out.empty()) throw Error("no trajectories");
  for (const auto& tr : out) tr.validate();
  return out;
}

std::vector<Trajectory> load_trajectories_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_trajectories_csv(ss.str(), schema);
}

}  // namespace elearn
