#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "toughopt/assembly.hpp"
#include "toughopt/mesh.hpp"
#include "toughopt/postproc.hpp"
#include "toughopt/solver.hpp"

namespace toughopt {

// Every artifact carries the configuration fingerprint as a comment line.
std::string hash_comment(std::uint64_t hash);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace,
                     std::uint64_t hash);
std::vector<TraceRow> read_trace_csv(const std::string& path);

struct ToughnessRow {
  int design = 0;
  double w = 0.0;
  ToughnessReport rep;
};
void write_toughness_csv(const std::string& path,
                         const std::vector<ToughnessRow>& rows,
                         std::uint64_t hash);

void write_convergence_csv(const std::string& path,
                           const std::vector<std::array<double, 2>>& rows,
                           std::uint64_t hash);

// One grid point x scenario; G_eff column holds the value or a word
// ("infeasible", "failed") for points without one.
struct SweepRow {
  std::vector<double> params;
  double w = 0.0;
  bool has_value = false;
  double G_eff = 0.0;
  std::string note;  // used when has_value is false
};
void write_sweep_csv(const std::string& path,
                     const std::vector<std::string>& param_names,
                     const std::vector<SweepRow>& rows, std::uint64_t hash);

void write_summary(const std::string& path, const SimulationResult& res,
                   const std::vector<ToughnessRow>& tough, std::uint64_t hash);

// Legacy-ASCII VTK unstructured grid of the active quadtree cells with nodal
// displacement/damage point data (enrichment vanishes at vertices, so nodal
// values are exact there) and per-cell level/cut markers.
void write_vtk_fields(const std::string& path, const AdaptiveMesh& mesh,
                      const Quadrature& quad, const DofMap& dofs,
                      const Eigen::VectorXd& x);

void ensure_dir(const std::string& path);

}  // namespace toughopt
