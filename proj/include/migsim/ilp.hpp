#pragma once

// Multi-objective ILP for MIG-enabled VM placement: a solver-neutral model
// builder, CPLEX-LP export, a constraint checker for candidate solutions and
// an exhaustive oracle for desk-sized instances.

#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "migsim/mig_core.hpp"

namespace migsim::ilp {

inline constexpr int kDefaultBigM = 16;

struct GpuSlot {
  int pm = 0;
  int gpu = 0;    // index within the PM
  int start = 0;  // z offset

  friend bool operator==(const GpuSlot&, const GpuSlot&) = default;
};

struct Vm {
  ProfileId profile = ProfileId::k1g5gb;
  double weight = 1.0;            // a_i
  double migration_weight = 0.0;  // delta_i; 0 for newly arrived VMs
  double cpu = 0.0;               // c_i
  double ram = 0.0;               // r_i
  std::optional<GpuSlot> previous;  // x'_ij / y'_ijk

  int size() const { return spec(profile).size_blocks; }
  int max_start() const { return spec(profile).max_start; }
  int hw_tag() const { return spec(profile).hw_tag; }
};

struct Pm {
  double cpu_capacity = 0.0;  // C_j
  double ram_capacity = 0.0;  // R_j
  double weight = 1.0;        // b_j
  std::vector<int> gpu_tags;  // H_jk, one per GPU
};

struct Instance {
  std::vector<Vm> vms;
  std::vector<Pm> pms;
  int big_m = kDefaultBigM;

  std::size_t gpu_count() const;
};

// Throws std::invalid_argument when B is too small for the instance.
void check_instance(const Instance& instance);

enum class VarFamily { X, Y, Z, Alpha, Beta, Phi, Gamma, M, Omega };
enum class VarKind { Binary, Integer };
enum class Sense { LessEq, GreaterEq, Equal };

struct Variable {
  std::string name;
  VarFamily family;
  VarKind kind;
  std::optional<double> lower;  // nullopt = unbounded
  std::optional<double> upper;
};

struct Term {
  std::size_t var;
  double coef;
};

struct Constraint {
  std::string name;
  int equation;
  std::vector<Term> terms;
  Sense sense;
  double rhs;
};

struct Objective {
  std::string name;
  bool maximize;
  std::vector<Term> terms;
};

struct Model {
  std::vector<Variable> variables;
  std::vector<Constraint> constraints;
  std::array<Objective, 3> objectives;  // acceptance, hardware, migration

  std::size_t count(VarFamily family) const;
  std::size_t count_equation(int equation) const;
  std::optional<std::size_t> find(const std::string& var_name) const;
};

/// Builds every constraint family of the formulation. Throws
/// std::invalid_argument when a VM with a nonzero migration weight has no
/// previous assignment.
Model build_model(const Instance& instance);

/// Maximize w1*acceptance - w2*hardware - w3*migration.
struct WeightedObjective {
  double acceptance = 1.0;
  double hardware = 1.0;
  double migration = 1.0;
};

/// Objective `stage` (1..3) alone, earlier objectives pinned to `fixed`.
struct StageObjective {
  int stage = 1;
  std::vector<double> fixed;
};

using ExportMode = std::variant<WeightedObjective, StageObjective>;

std::string export_lp(const Model& model, const ExportMode& mode);

struct ObjectiveValues {
  double acceptance = 0.0;
  double hardware = 0.0;
  double migration = 0.0;
};

/// A candidate solution at the variable level, so that inconsistent
/// assignments (y without x, ...) can be represented and checked.
struct Solution {
  std::set<std::pair<int, int>> x;                    // (vm, pm)
  std::map<std::tuple<int, int, int>, int> y;         // (vm, pm, gpu) -> z
  std::optional<std::vector<int>> phi;                // explicit PM activity
  std::optional<std::vector<std::vector<int>>> gamma; // explicit GPU activity
  ObjectiveValues objectives;

  static Solution from_assignments(const std::vector<std::optional<GpuSlot>>& slots);

  bool accepted(int vm) const;
  std::optional<GpuSlot> slot(int vm) const;
  std::vector<std::optional<GpuSlot>> assignments(std::size_t vm_count) const;
};

/// Objective values; uses the explicit phi/gamma when present, otherwise
/// the smallest activity vectors consistent with the assignment.
ObjectiveValues evaluate(const Instance& instance, const Solution& solution);

struct Violation {
  std::string family;   // e.g. "eq10/11"
  std::string indices;  // e.g. "i=0,i'=1,j=0,k=0"

  std::string to_string() const { return family + "[" + indices + "]"; }
  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty iff the solution satisfies every constraint. Throws
/// std::invalid_argument if the solution references unknown entities.
std::vector<Violation> validate(const Instance& instance, const Solution& solution);

struct Lexicographic {};
using SolveMode = std::variant<Lexicographic, WeightedObjective>;

struct SearchLimits {
  std::size_t max_vms = 8;
  std::size_t max_pms = 2;
  std::size_t max_gpus_per_pm = 2;
  double max_leaves = 2e7;  // product over VMs of (placement options + 1)
};

class SizeLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Exhaustive optimum over accept/reject and every (pm, gpu, start) choice
/// allowed by the start-offset constraints. Lexicographic mode maximizes
/// acceptance, then minimizes hardware, then migrations; the first optimum
/// in enumeration order wins. Lexicographic search prunes branches that can
/// no longer reach the best acceptance. Throws SizeLimitError past `limits`.
Solution brute_force_solve(const Instance& instance, const SolveMode& mode = Lexicographic{},
                           const SearchLimits& limits = {});

/// Start offsets z in [0, 8) admitted by z = g*beta (beta integer), z <= s.
std::vector<int> feasible_offsets(int size_blocks, int max_start);

}  // namespace migsim::ilp
