#include "idlearn/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace idlearn {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void put_vec(std::ostream& os, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << num(v[i]);
}

void put_blank(std::ostream& os, int n) {
  for (int i = 0; i < n; ++i) os << ',';
}

void put_header(std::ostream& os, const char* name, int dim) {
  for (int i = 0; i < dim; ++i) os << ',' << name << i;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_cell(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    T v;
    if constexpr (std::is_same_v<T, int>) {
      v = std::stoi(s, &pos);
    } else {
      v = std::stod(s, &pos);
    }
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("metrics csv line " + std::to_string(line_no) + ": bad value '" + s + "'");
  }
}

}  // namespace

void write_metrics_csv(const std::vector<IterationMetrics>& metrics, std::ostream& os) {
  os << "iteration,pos_err_mean,fb_mag_mean,accel_err_mean,converged,steps,aborted\n";
  for (const auto& m : metrics) {
    os << m.iteration << ',' << num(m.pos_err_mean) << ',' << num(m.fb_mag_mean) << ','
       << num(m.accel_err_mean) << ',' << int(m.converged) << ',' << m.steps_used << ','
       << int(m.aborted) << '\n';
  }
}

std::vector<IterationMetrics> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("iteration,", 0) != 0) {
    throw IoError("metrics csv: missing header");
  }
  std::vector<IterationMetrics> out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 6 && cells.size() != 7) {
      throw IoError("metrics csv line " + std::to_string(line_no) + ": expected 6 or 7 columns");
    }
    IterationMetrics m;
    m.iteration = parse_cell<int>(cells[0], line_no);
    m.pos_err_mean = parse_cell<double>(cells[1], line_no);
    m.fb_mag_mean = parse_cell<double>(cells[2], line_no);
    m.accel_err_mean = parse_cell<double>(cells[3], line_no);
    m.converged = parse_cell<int>(cells[4], line_no) != 0;
    m.steps_used = parse_cell<int>(cells[5], line_no);
    if (cells.size() == 7) m.aborted = parse_cell<int>(cells[6], line_no) != 0;
    out.push_back(m);
  }
  return out;
}

void write_trace_csv(const std::vector<StepTrace>& trace, std::ostream& os) {
  const int dim = trace.empty() ? 0 : trace.front().x_d.dim();
  os << "t";
  for (const char* name : {"q_true", "q_ref", "xd_q", "xd_qd", "xd_qdd", "xa_q", "xa_qd", "xa_qdd",
                           "tau_total", "tau_fb", "tau_fb_learner", "f_prev"}) {
    put_header(os, name, dim);
  }
  os << '\n';
  for (const auto& s : trace) {
    os << s.t;
    put_vec(os, s.q_true);
    put_vec(os, s.q_ref);
    put_vec(os, s.x_d.q);
    put_vec(os, s.x_d.qd);
    put_vec(os, s.x_d.qdd);
    if (s.x_a) {
      put_vec(os, s.x_a->q);
      put_vec(os, s.x_a->qd);
      put_vec(os, s.x_a->qdd);
    } else {
      put_blank(os, 3 * dim);
    }
    put_vec(os, s.tau_total);
    put_vec(os, s.tau_fb_applied);
    put_vec(os, s.tau_fb_learner);
    put_vec(os, s.f_prev_at_xd);
    os << '\n';
  }
}

void write_aggregate_csv(const AggregateResult& agg, std::ostream& os) {
  os << "group,iteration,count,excluded,pos_err_mean,pos_err_std,fb_mag_mean,fb_mag_std,"
        "accel_err_mean,accel_err_std\n";
  for (const auto& [group, rows] : agg.groups) {
    for (const auto& r : rows) {
      os << group << ',' << r.iteration << ',' << r.count << ',' << r.excluded << ','
         << num(r.pos_err.mean) << ',' << num(r.pos_err.std) << ',' << num(r.fb_mag.mean) << ','
         << num(r.fb_mag.std) << ',' << num(r.accel_err.mean) << ',' << num(r.accel_err.std)
         << '\n';
    }
  }
}

std::string plot_file_name(const std::string& group) {
  std::string name = group;
  for (char& c : name) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                      c == '_' || c == '-' || c == '.';
    if (!keep) c = '_';
  }
  return name + ".csv";
}

std::vector<std::filesystem::path> write_plot_data(const AggregateResult& agg,
                                                   const std::filesystem::path& dir) {
  if (agg.groups.empty()) throw IoError("plot data: no groups");
  ensure_writable_dir(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& [group, rows] : agg.groups) {
    const auto path = dir / plot_file_name(group);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    os << "iteration,pos_err_mean,pos_err_upper,fb_mag_mean,fb_mag_upper\n";
    for (const auto& r : rows) {
      os << r.iteration << ',' << num(r.pos_err.mean) << ',' << num(r.pos_err.mean + r.pos_err.std)
         << ',' << num(r.fb_mag.mean) << ',' << num(r.fb_mag.mean + r.fb_mag.std) << '\n';
    }
    if (!os) throw IoError("write failed for '" + path.string() + "'");
    paths.push_back(path);
  }
  return paths;
}

void ensure_writable_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
  const auto probe = dir / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os || !(os << "x")) throw IoError("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace idlearn
