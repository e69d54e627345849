#include "toughopt/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace toughopt {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write file: " + path);
  return os;
}

}  // namespace

std::string hash_comment(std::uint64_t hash) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "# config_hash=%016llx",
                (unsigned long long)hash);
  return buf;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace,
                     std::uint64_t hash) {
  std::ofstream os = open_out(path);
  os << hash_comment(hash) << "\n";
  os << "step,t,tip_x,tip_y,crack_length,J,energy,n_dofs\n";
  for (const auto& r : trace)
    os << r.step << "," << fmt(r.t) << "," << fmt(r.tip_x) << ","
       << fmt(r.tip_y) << "," << fmt(r.crack_length) << "," << fmt(r.J) << ","
       << fmt(r.energy) << "," << r.n_dofs << "\n";
  if (!os) throw std::runtime_error("short write: " + path);
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trace file: " + path);
  std::vector<TraceRow> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("step,", 0) != 0)
        throw std::runtime_error("unrecognized trace header in " + path);
      header_seen = true;
      continue;
    }
    TraceRow r;
    std::istringstream ls(line);
    char c;
    if (!(ls >> r.step >> c >> r.t >> c >> r.tip_x >> c >> r.tip_y >> c >>
          r.crack_length >> c >> r.J >> c >> r.energy >> c >> r.n_dofs))
      throw std::runtime_error("malformed trace row in " + path + ": " + line);
    out.push_back(r);
  }
  if (!header_seen)
    throw std::runtime_error("trace file has no header: " + path);
  return out;
}

void write_toughness_csv(const std::string& path,
                         const std::vector<ToughnessRow>& rows,
                         std::uint64_t hash) {
  std::ofstream os = open_out(path);
  os << hash_comment(hash) << "\n";
  os << "design,w,G_eff,window_lo,window_hi,half_width\n";
  for (const auto& r : rows)
    os << r.design << "," << fmt(r.w) << "," << fmt(r.rep.g_eff) << ","
       << fmt(r.rep.x_lo) << "," << fmt(r.rep.x_hi) << "," << r.rep.half_width
       << "\n";
  if (!os) throw std::runtime_error("short write: " + path);
}

void write_convergence_csv(const std::string& path,
                           const std::vector<std::array<double, 2>>& rows,
                           std::uint64_t hash) {
  std::ofstream os = open_out(path);
  os << hash_comment(hash) << "\n";
  os << "evaluations,best_f\n";
  for (const auto& r : rows)
    os << int(r[0]) << "," << fmt(r[1]) << "\n";
  if (!os) throw std::runtime_error("short write: " + path);
}

void write_sweep_csv(const std::string& path,
                     const std::vector<std::string>& param_names,
                     const std::vector<SweepRow>& rows, std::uint64_t hash) {
  std::ofstream os = open_out(path);
  os << hash_comment(hash) << "\n";
  for (const auto& n : param_names) os << n << ",";
  os << "w,G_eff\n";
  for (const auto& r : rows) {
    for (double p : r.params) os << fmt(p) << ",";
    os << fmt(r.w) << ",";
    if (r.has_value)
      os << fmt(r.G_eff);
    else
      os << r.note;
    os << "\n";
  }
  if (!os) throw std::runtime_error("short write: " + path);
}

void write_summary(const std::string& path, const SimulationResult& res,
                   const std::vector<ToughnessRow>& tough,
                   std::uint64_t hash) {
  std::ofstream os = open_out(path);
  os << hash_comment(hash) << "\n";
  os << "status " << (res.ok ? "ok" : "failed") << "\n";
  os << "termination " << res.termination << "\n";
  os << "steps " << res.trace.size() << "\n";
  os << "backtracks " << res.n_backtracks << "\n";
  os << "dt_halvings " << res.n_dt_halvings << "\n";
  os << "adaptations " << res.n_adapts << "\n";
  os << "final_cells " << res.final_cells << "\n";
  os << "final_dofs " << res.final_dofs << "\n";
  os << "wall_seconds " << fmt(res.wall_seconds) << "\n";
  if (!res.trace.empty()) {
    os << "final_t " << fmt(res.trace.back().t) << "\n";
    os << "final_crack_length " << fmt(res.trace.back().crack_length) << "\n";
  }
  for (const auto& r : tough)
    os << "toughness w=" << fmt(r.w) << " " << fmt(r.rep.g_eff) << "\n";
  if (!os) throw std::runtime_error("short write: " + path);
}

void write_vtk_fields(const std::string& path, const AdaptiveMesh& mesh,
                      const Quadrature& quad, const DofMap& dofs,
                      const Eigen::VectorXd& x) {
  std::ofstream os = open_out(path);
  const int nv = mesh.n_vertices();
  const auto& cells = mesh.active_cells();
  os << "# vtk DataFile Version 3.0\n";
  os << "toughopt fields\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nv << " double\n";
  for (int v = 0; v < nv; ++v) {
    const Vec2 p = mesh.vertex_pos(v);
    os << fmt(p.x()) << " " << fmt(p.y()) << " 0\n";
  }
  os << "CELLS " << cells.size() << " " << 5 * cells.size() << "\n";
  for (int c : cells) {
    const auto vtx = mesh.cell_vertices(c);
    os << "4 " << vtx[0] << " " << vtx[1] << " " << vtx[2] << " " << vtx[3]
       << "\n";
  }
  os << "CELL_TYPES " << cells.size() << "\n";
  for (size_t i = 0; i < cells.size(); ++i) os << "9\n";
  os << "POINT_DATA " << nv << "\n";
  os << "VECTORS displacement double\n";
  for (int v = 0; v < nv; ++v)
    os << fmt(x[2 * v]) << " " << fmt(x[2 * v + 1]) << " 0\n";
  os << "SCALARS damage double 1\n";
  os << "LOOKUP_TABLE default\n";
  for (int v = 0; v < nv; ++v) os << fmt(x[dofs.c_dof(v)]) << "\n";
  os << "CELL_DATA " << cells.size() << "\n";
  os << "SCALARS level int 1\n";
  os << "LOOKUP_TABLE default\n";
  for (int c : cells) os << mesh.cell_level(c) << "\n";
  os << "SCALARS cut int 1\n";
  os << "LOOKUP_TABLE default\n";
  for (size_t i = 0; i < cells.size(); ++i)
    os << (quad.cells[i].cut ? 1 : 0) << "\n";
  if (!os) throw std::runtime_error("short write: " + path);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec)
    throw std::runtime_error("cannot create directory " + path + ": " +
                             ec.message());
}

}  // namespace toughopt
