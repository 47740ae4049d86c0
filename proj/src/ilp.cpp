#include "migsim/ilp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "migsim/text.hpp"

namespace migsim::ilp {
namespace {

constexpr double kEps = 1e-9;

std::string idx(std::initializer_list<std::size_t> parts) {
  std::string out;
  for (std::size_t p : parts) out += "_" + std::to_string(p);
  return out;
}

class ModelBuilder {
 public:
  explicit ModelBuilder(const Instance& in) : in_(in) {}

  Model build() {
    const std::size_t n = in_.vms.size();
    const std::size_t m = in_.pms.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vm& vm = in_.vms[i];
      if (vm.migration_weight != 0.0 && !vm.previous)
        throw std::invalid_argument("VM " + std::to_string(i) +
                                    " has a migration weight but no previous assignment");
      if (vm.previous && (vm.previous->pm < 0 || static_cast<std::size_t>(vm.previous->pm) >= m ||
                          vm.previous->gpu < 0 ||
                          static_cast<std::size_t>(vm.previous->gpu) >= in_.pms[vm.previous->pm].gpu_tags.size()))
        throw std::invalid_argument("VM " + std::to_string(i) + " has an out-of-range previous assignment");
    }

    x_.assign(n, std::vector<std::size_t>(m));
    y_.assign(n, std::vector<std::vector<std::size_t>>(m));
    z_ = y_;
    m_ = x_;
    w_ = y_;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) x_[i][j] = add("x" + idx({i, j}), VarFamily::X, VarKind::Binary);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < gpus(j); ++k)
          y_[i][j].push_back(add("y" + idx({i, j, k}), VarFamily::Y, VarKind::Binary));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < gpus(j); ++k)
          z_[i][j].push_back(add("z" + idx({i, j, k}), VarFamily::Z, VarKind::Integer, 0.0));
    alpha_.clear();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t i2 = 0; i2 < n; ++i2) {
        if (i == i2) continue;
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t k = 0; k < gpus(j); ++k)
            alpha_[{i, i2, j, k}] = add("alpha" + idx({i, i2, j, k}), VarFamily::Alpha, VarKind::Binary);
      }
    for (std::size_t i = 0; i < n; ++i)
      beta_.push_back(add("beta" + idx({i}), VarFamily::Beta, VarKind::Integer, std::nullopt));
    for (std::size_t j = 0; j < m; ++j) phi_.push_back(add("phi" + idx({j}), VarFamily::Phi, VarKind::Binary));
    gamma_.assign(m, {});
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < gpus(j); ++k)
        gamma_[j].push_back(add("gamma" + idx({j, k}), VarFamily::Gamma, VarKind::Binary));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) m_[i][j] = add("m" + idx({i, j}), VarFamily::M, VarKind::Binary);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < gpus(j); ++k)
          w_[i][j].push_back(add("omega" + idx({i, j, k}), VarFamily::Omega, VarKind::Binary));

    objectives();
    constraints();
    return std::move(model_);
  }

 private:
  std::size_t gpus(std::size_t j) const { return in_.pms[j].gpu_tags.size(); }

  std::size_t add(std::string name, VarFamily family, VarKind kind,
                  std::optional<double> lower = 0.0) {
    std::optional<double> upper;
    if (kind == VarKind::Binary) upper = 1.0;
    model_.variables.push_back({std::move(name), family, kind, lower, upper});
    return model_.variables.size() - 1;
  }

  void constrain(int eq, std::string name, std::vector<Term> terms, Sense sense, double rhs) {
    model_.constraints.push_back({"eq" + std::to_string(eq) + "_" + name, eq, std::move(terms), sense, rhs});
  }

  double prev_x(std::size_t i, std::size_t j) const {
    const auto& p = in_.vms[i].previous;
    return p && static_cast<std::size_t>(p->pm) == j ? 1.0 : 0.0;
  }
  double prev_y(std::size_t i, std::size_t j, std::size_t k) const {
    const auto& p = in_.vms[i].previous;
    return p && static_cast<std::size_t>(p->pm) == j && static_cast<std::size_t>(p->gpu) == k ? 1.0 : 0.0;
  }

  void objectives() {
    Objective acc{"acceptance", true, {}};
    Objective hw{"hardware", false, {}};
    Objective mig{"migration", false, {}};
    const std::size_t n = in_.vms.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < in_.pms.size(); ++j) acc.terms.push_back({x_[i][j], in_.vms[i].weight});
    for (std::size_t j = 0; j < in_.pms.size(); ++j) {
      hw.terms.push_back({phi_[j], in_.pms[j].weight});
      for (std::size_t k = 0; k < gpus(j); ++k) hw.terms.push_back({gamma_[j][k], in_.pms[j].weight});
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < in_.pms.size(); ++j) {
        mig.terms.push_back({m_[i][j], in_.vms[i].migration_weight});
        for (std::size_t k = 0; k < gpus(j); ++k) mig.terms.push_back({w_[i][j][k], in_.vms[i].migration_weight});
      }
    model_.objectives = {acc, hw, mig};
  }

  void constraints() {
    const std::size_t n = in_.vms.size();
    const std::size_t m = in_.pms.size();
    const double big = in_.big_m;

    for (std::size_t j = 0; j < m; ++j) {
      std::vector<Term> cpu, ram;
      for (std::size_t i = 0; i < n; ++i) {
        cpu.push_back({x_[i][j], in_.vms[i].cpu});
        ram.push_back({x_[i][j], in_.vms[i].ram});
      }
      constrain(4, "j" + std::to_string(j), cpu, Sense::LessEq, in_.pms[j].cpu_capacity);
      constrain(5, "j" + std::to_string(j), ram, Sense::LessEq, in_.pms[j].ram_capacity);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Term> t;
      for (std::size_t j = 0; j < m; ++j) t.push_back({x_[i][j], 1});
      constrain(6, "i" + std::to_string(i), t, Sense::LessEq, 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Term> t;
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < gpus(j); ++k) t.push_back({y_[i][j][k], 1});
      constrain(7, "i" + std::to_string(i), t, Sense::LessEq, 1);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        std::vector<Term> t{{x_[i][j], 1}};
        for (std::size_t k = 0; k < gpus(j); ++k) t.push_back({y_[i][j][k], -1});
        constrain(8, ij(i, j), t, Sense::LessEq, 0);
      }
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      constrain(9, ijk(i, j, k), {{y_[i][j][k], 1}, {x_[i][j], -1}}, Sense::LessEq, 0);
    });
    for (const auto& [key, a] : alpha_) {
      const auto [i, i2, j, k] = key;
      const std::string name = "i" + std::to_string(i) + "_i" + std::to_string(i2) + "_j" + std::to_string(j) +
                               "_k" + std::to_string(k);
      constrain(10, name,
                {{z_[i][j][k], 1}, {y_[i][j][k], double(in_.vms[i].size())}, {z_[i2][j][k], -1}, {a, -big}},
                Sense::LessEq, 0);
    }
    for (const auto& [key, a] : alpha_) {
      const auto [i, i2, j, k] = key;
      const std::string name = "i" + std::to_string(i) + "_i" + std::to_string(i2) + "_j" + std::to_string(j) +
                               "_k" + std::to_string(k);
      constrain(11, name,
                {{z_[i2][j][k], 1}, {y_[i2][j][k], double(in_.vms[i2].size())}, {z_[i][j][k], -1}, {a, big}},
                Sense::LessEq, big);
    }
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      const double g = in_.vms[i].size();
      constrain(12, ijk(i, j, k), {{z_[i][j][k], 1}, {beta_[i], -g}, {y_[i][j][k], big}}, Sense::LessEq, big);
    });
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      const double g = in_.vms[i].size();
      constrain(13, ijk(i, j, k), {{z_[i][j][k], -1}, {beta_[i], g}, {y_[i][j][k], big}}, Sense::LessEq, big);
    });
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      constrain(14, ijk(i, j, k), {{z_[i][j][k], 1}}, Sense::LessEq, in_.vms[i].max_start());
    });
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      const double h = in_.vms[i].hw_tag();
      const double hk = in_.pms[j].gpu_tags[k];
      constrain(15, ijk(i, j, k), {{y_[i][j][k], big}}, Sense::LessEq, big + hk - h);
    });
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      const double h = in_.vms[i].hw_tag();
      const double hk = in_.pms[j].gpu_tags[k];
      constrain(16, ijk(i, j, k), {{y_[i][j][k], big}}, Sense::LessEq, big + h - hk);
    });
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        constrain(17, ij(i, j), {{x_[i][j], 1}, {phi_[j], -1}}, Sense::LessEq, 0);
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      constrain(18, ijk(i, j, k), {{y_[i][j][k], 1}, {gamma_[j][k], -1}}, Sense::LessEq, 0);
    });
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < gpus(j); ++k) {
        std::vector<Term> t{{gamma_[j][k], 1}};
        for (std::size_t i = 0; i < n; ++i) t.push_back({y_[i][j][k], -1});
        constrain(19, "j" + std::to_string(j) + "_k" + std::to_string(k), t, Sense::LessEq, 0);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        constrain(20, ij(i, j), {{x_[i][j], 1}, {m_[i][j], -1}}, Sense::LessEq, prev_x(i, j));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        constrain(21, ij(i, j), {{x_[i][j], -1}, {m_[i][j], -1}}, Sense::LessEq, -prev_x(i, j));
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      constrain(22, ijk(i, j, k), {{y_[i][j][k], 1}, {w_[i][j][k], -1}}, Sense::LessEq, prev_y(i, j, k));
    });
    for_ijk([&](std::size_t i, std::size_t j, std::size_t k) {
      constrain(23, ijk(i, j, k), {{y_[i][j][k], -1}, {w_[i][j][k], -1}}, Sense::LessEq, -prev_y(i, j, k));
    });
  }

  template <class F>
  void for_ijk(F&& f) {
    for (std::size_t i = 0; i < in_.vms.size(); ++i)
      for (std::size_t j = 0; j < in_.pms.size(); ++j)
        for (std::size_t k = 0; k < gpus(j); ++k) f(i, j, k);
  }

  static std::string ij(std::size_t i, std::size_t j) {
    return "i" + std::to_string(i) + "_j" + std::to_string(j);
  }
  static std::string ijk(std::size_t i, std::size_t j, std::size_t k) {
    return ij(i, j) + "_k" + std::to_string(k);
  }

  const Instance& in_;
  Model model_;
  std::vector<std::vector<std::size_t>> x_, m_;
  std::vector<std::vector<std::vector<std::size_t>>> y_, z_, w_;
  std::map<std::array<std::size_t, 4>, std::size_t> alpha_;
  std::vector<std::size_t> beta_, phi_;
  std::vector<std::vector<std::size_t>> gamma_;
};

// Appends " + 3 x_0_1"-style terms, wrapping long expressions.
void write_expression(std::ostringstream& out, const Model& model, const std::vector<Term>& terms,
                      bool skip_zero) {
  std::size_t written = 0;
  for (const Term& t : terms) {
    if (skip_zero && t.coef == 0.0) continue;
    if (written > 0 && written % 8 == 0) out << "\n  ";
    const bool negative = t.coef < 0;
    if (written == 0)
      out << (negative ? " -" : " ");
    else
      out << (negative ? " - " : " + ");
    out << format_number(std::abs(t.coef)) << " " << model.variables[t.var].name;
    ++written;
  }
  if (written == 0 && !model.variables.empty()) out << " 0 " << model.variables.front().name;
}

const char* sense_text(Sense s) {
  switch (s) {
    case Sense::LessEq: return "<=";
    case Sense::GreaterEq: return ">=";
    case Sense::Equal: return "=";
  }
  return "=";
}

struct Activity {
  std::vector<int> phi;
  std::vector<std::vector<int>> gamma;
};

Activity activity_of(const Instance& in, const Solution& s) {
  Activity a;
  if (s.phi) {
    a.phi = *s.phi;
  } else {
    a.phi.assign(in.pms.size(), 0);
    for (const auto& [i, j] : s.x) a.phi[j] = 1;
  }
  if (s.gamma) {
    a.gamma = *s.gamma;
  } else {
    a.gamma.resize(in.pms.size());
    for (std::size_t j = 0; j < in.pms.size(); ++j) a.gamma[j].assign(in.pms[j].gpu_tags.size(), 0);
    for (const auto& [key, z] : s.y) a.gamma[std::get<1>(key)][std::get<2>(key)] = 1;
  }
  return a;
}

void check_refs(const Instance& in, const Solution& s) {
  const auto bad = [](const std::string& what) { throw std::invalid_argument("solution references " + what); };
  for (const auto& [i, j] : s.x) {
    if (i < 0 || static_cast<std::size_t>(i) >= in.vms.size()) bad("unknown VM " + std::to_string(i));
    if (j < 0 || static_cast<std::size_t>(j) >= in.pms.size()) bad("unknown PM " + std::to_string(j));
  }
  for (const auto& [key, z] : s.y) {
    const auto [i, j, k] = key;
    if (i < 0 || static_cast<std::size_t>(i) >= in.vms.size()) bad("unknown VM " + std::to_string(i));
    if (j < 0 || static_cast<std::size_t>(j) >= in.pms.size()) bad("unknown PM " + std::to_string(j));
    if (k < 0 || static_cast<std::size_t>(k) >= in.pms[j].gpu_tags.size()) bad("unknown GPU " + std::to_string(k));
  }
  if (s.phi && s.phi->size() != in.pms.size()) bad("a phi vector of the wrong length");
  if (s.gamma) {
    if (s.gamma->size() != in.pms.size()) bad("a gamma table of the wrong shape");
    for (std::size_t j = 0; j < in.pms.size(); ++j)
      if ((*s.gamma)[j].size() != in.pms[j].gpu_tags.size()) bad("a gamma table of the wrong shape");
  }
}

}  // namespace

std::size_t Instance::gpu_count() const {
  std::size_t total = 0;
  for (const auto& pm : pms) total += pm.gpu_tags.size();
  return total;
}

void check_instance(const Instance& instance) {
  int max_g = 0;
  for (const auto& vm : instance.vms) max_g = std::max(max_g, vm.size());
  if (instance.big_m < kBlockCount + max_g)
    throw std::invalid_argument("big-M " + std::to_string(instance.big_m) + " must be at least " +
                                std::to_string(kBlockCount + max_g));
  for (const auto& vm : instance.vms)
    for (const auto& pm : instance.pms)
      for (int tag : pm.gpu_tags)
        if (std::abs(vm.hw_tag() - tag) > instance.big_m)
          throw std::invalid_argument("big-M is smaller than a hardware-tag difference");
}

std::size_t Model::count(VarFamily family) const {
  return static_cast<std::size_t>(
      std::count_if(variables.begin(), variables.end(), [&](const Variable& v) { return v.family == family; }));
}

std::size_t Model::count_equation(int equation) const {
  return static_cast<std::size_t>(std::count_if(
      constraints.begin(), constraints.end(), [&](const Constraint& c) { return c.equation == equation; }));
}

std::optional<std::size_t> Model::find(const std::string& var_name) const {
  for (std::size_t v = 0; v < variables.size(); ++v)
    if (variables[v].name == var_name) return v;
  return std::nullopt;
}

Model build_model(const Instance& instance) {
  check_instance(instance);
  return ModelBuilder(instance).build();
}

std::string export_lp(const Model& model, const ExportMode& mode) {
  std::ostringstream out;
  std::vector<Constraint> extra;
  out << "\\ MIG-enabled VM placement model\n";
  if (const auto* w = std::get_if<WeightedObjective>(&mode)) {
    out << "\\ objective: weighted " << format_number(w->acceptance) << " * acceptance - "
        << format_number(w->hardware) << " * hardware - " << format_number(w->migration) << " * migration\n";
    std::vector<Term> terms;
    const double weights[3] = {w->acceptance, -w->hardware, -w->migration};
    for (int o = 0; o < 3; ++o)
      for (const Term& t : model.objectives[o].terms) terms.push_back({t.var, weights[o] * t.coef});
    out << "Maximize\n obj:";
    write_expression(out, model, terms, true);
    out << "\n";
  } else {
    const auto& st = std::get<StageObjective>(mode);
    if (st.stage < 1 || st.stage > 3) throw std::invalid_argument("stage must be 1, 2 or 3");
    if (st.fixed.size() < static_cast<std::size_t>(st.stage - 1))
      throw std::invalid_argument("stage " + std::to_string(st.stage) + " needs " +
                                  std::to_string(st.stage - 1) + " fixed objective values");
    const Objective& obj = model.objectives[st.stage - 1];
    out << "\\ objective: stage " << st.stage << " (" << obj.name << ")\n";
    out << (obj.maximize ? "Maximize" : "Minimize") << "\n obj:";
    write_expression(out, model, obj.terms, true);
    out << "\n";
    for (int s = 0; s < st.stage - 1; ++s)
      extra.push_back({"fix_" + model.objectives[s].name, 0, model.objectives[s].terms, Sense::Equal, st.fixed[s]});
  }

  out << "Subject To\n";
  const auto write_constraint = [&](const Constraint& c) {
    out << " " << c.name << ":";
    write_expression(out, model, c.terms, false);
    out << " " << sense_text(c.sense) << " " << format_number(c.rhs) << "\n";
  };
  for (const auto& c : extra) write_constraint(c);
  for (const auto& c : model.constraints) write_constraint(c);

  out << "Bounds\n";
  for (const auto& v : model.variables) {
    if (v.kind == VarKind::Binary) continue;
    if (!v.lower && !v.upper)
      out << " " << v.name << " free\n";
    else if (v.lower && !v.upper)
      out << " " << v.name << " >= " << format_number(*v.lower) << "\n";
    else if (v.lower && v.upper)
      out << " " << format_number(*v.lower) << " <= " << v.name << " <= " << format_number(*v.upper) << "\n";
    else
      out << " -inf <= " << v.name << " <= " << format_number(*v.upper) << "\n";
  }
  out << "Binary\n";
  for (const auto& v : model.variables)
    if (v.kind == VarKind::Binary) out << " " << v.name << "\n";
  out << "General\n";
  for (const auto& v : model.variables)
    if (v.kind == VarKind::Integer) out << " " << v.name << "\n";
  out << "End\n";
  return out.str();
}

Solution Solution::from_assignments(const std::vector<std::optional<GpuSlot>>& slots) {
  Solution s;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) continue;
    const int vm = static_cast<int>(i);
    s.x.insert({vm, slots[i]->pm});
    s.y[{vm, slots[i]->pm, slots[i]->gpu}] = slots[i]->start;
  }
  return s;
}

bool Solution::accepted(int vm) const {
  return std::any_of(x.begin(), x.end(), [&](const auto& e) { return e.first == vm; });
}

std::optional<GpuSlot> Solution::slot(int vm) const {
  for (const auto& [key, z] : y)
    if (std::get<0>(key) == vm) return GpuSlot{std::get<1>(key), std::get<2>(key), z};
  return std::nullopt;
}

std::vector<std::optional<GpuSlot>> Solution::assignments(std::size_t vm_count) const {
  std::vector<std::optional<GpuSlot>> out(vm_count);
  for (std::size_t i = 0; i < vm_count; ++i) out[i] = slot(static_cast<int>(i));
  return out;
}

ObjectiveValues evaluate(const Instance& in, const Solution& s) {
  check_refs(in, s);
  ObjectiveValues v;
  for (const auto& [i, j] : s.x) v.acceptance += in.vms[i].weight;
  const Activity a = activity_of(in, s);
  for (std::size_t j = 0; j < in.pms.size(); ++j) {
    double active = a.phi[j];
    for (int g : a.gamma[j]) active += g;
    v.hardware += in.pms[j].weight * active;
  }
  for (std::size_t i = 0; i < in.vms.size(); ++i) {
    const Vm& vm = in.vms[i];
    if (vm.migration_weight == 0.0) continue;
    double changes = 0.0;
    for (std::size_t j = 0; j < in.pms.size(); ++j) {
      const bool now_x = s.x.count({static_cast<int>(i), static_cast<int>(j)}) != 0;
      const bool was_x = vm.previous && static_cast<std::size_t>(vm.previous->pm) == j;
      changes += now_x != was_x;
      for (std::size_t k = 0; k < in.pms[j].gpu_tags.size(); ++k) {
        const bool now_y = s.y.count({static_cast<int>(i), static_cast<int>(j), static_cast<int>(k)}) != 0;
        const bool was_y = was_x && static_cast<std::size_t>(vm.previous->gpu) == k;
        changes += now_y != was_y;
      }
    }
    v.migration += vm.migration_weight * changes;
  }
  return v;
}

std::vector<Violation> validate(const Instance& in, const Solution& s) {
  check_refs(in, s);
  std::vector<Violation> out;
  const auto flag = [&](std::string family, std::string indices) {
    out.push_back({std::move(family), std::move(indices)});
  };
  const auto S = [](auto v) { return std::to_string(v); };
  const std::size_t n = in.vms.size();
  const std::size_t m = in.pms.size();

  for (std::size_t j = 0; j < m; ++j) {
    double cpu = 0, ram = 0;
    for (const auto& [i, pj] : s.x)
      if (static_cast<std::size_t>(pj) == j) {
        cpu += in.vms[i].cpu;
        ram += in.vms[i].ram;
      }
    if (cpu > in.pms[j].cpu_capacity + kEps) flag("eq4", "j=" + S(j));
    if (ram > in.pms[j].ram_capacity + kEps) flag("eq5", "j=" + S(j));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int vi = static_cast<int>(i);
    const auto xs = std::count_if(s.x.begin(), s.x.end(), [&](const auto& e) { return e.first == vi; });
    const auto ys = std::count_if(s.y.begin(), s.y.end(), [&](const auto& e) { return std::get<0>(e.first) == vi; });
    if (xs > 1) flag("eq6", "i=" + S(i));
    if (ys > 1) flag("eq7", "i=" + S(i));
  }
  for (const auto& [i, j] : s.x) {
    const bool has_y = std::any_of(s.y.begin(), s.y.end(), [&, i = i, j = j](const auto& e) {
      return std::get<0>(e.first) == i && std::get<1>(e.first) == j;
    });
    if (!has_y) flag("eq8", "i=" + S(i) + ",j=" + S(j));
  }
  for (const auto& [key, z] : s.y) {
    const auto [i, j, k] = key;
    const std::string id = "i=" + S(i) + ",j=" + S(j) + ",k=" + S(k);
    const Vm& vm = in.vms[i];
    if (!s.x.count({i, j})) flag("eq9", id);
    if (z < 0) flag("eq24", id);
    if (z % vm.size() != 0) flag("eq12/13", id);
    if (z > vm.max_start()) flag("eq14", id);
    if (vm.hw_tag() != in.pms[j].gpu_tags[k]) flag("eq15/16", id);
  }
  for (auto a = s.y.begin(); a != s.y.end(); ++a) {
    for (auto b = std::next(a); b != s.y.end(); ++b) {
      const auto [i, j, k] = a->first;
      const auto [i2, j2, k2] = b->first;
      if (j != j2 || k != k2 || i == i2) continue;
      const int za = a->second, zb = b->second;
      const bool ordered = za + in.vms[i].size() <= zb || zb + in.vms[i2].size() <= za;
      if (!ordered) flag("eq10/11", "i=" + S(i) + ",i'=" + S(i2) + ",j=" + S(j) + ",k=" + S(k));
    }
  }
  if (s.phi)
    for (const auto& [i, j] : s.x)
      if ((*s.phi)[j] < 1) flag("eq17", "i=" + S(i) + ",j=" + S(j));
  if (s.gamma) {
    for (const auto& [key, z] : s.y) {
      const auto [i, j, k] = key;
      if ((*s.gamma)[j][k] < 1) flag("eq18", "i=" + S(i) + ",j=" + S(j) + ",k=" + S(k));
    }
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < in.pms[j].gpu_tags.size(); ++k) {
        const bool used = std::any_of(s.y.begin(), s.y.end(), [&](const auto& e) {
          return static_cast<std::size_t>(std::get<1>(e.first)) == j &&
                 static_cast<std::size_t>(std::get<2>(e.first)) == k;
        });
        if ((*s.gamma)[j][k] > 0 && !used) flag("eq19", "j=" + S(j) + ",k=" + S(k));
      }
  }
  return out;
}

std::vector<int> feasible_offsets(int size_blocks, int max_start) {
  std::vector<int> out;
  for (int z = 0; z <= max_start; ++z)
    if (z % size_blocks == 0) out.push_back(z);
  return out;
}

namespace {

class Search {
 public:
  Search(const Instance& in, const SolveMode& mode) : in_(in), mode_(mode) {
    for (const Vm& vm : in.vms) {
      std::vector<GpuSlot> opts;
      for (std::size_t j = 0; j < in.pms.size(); ++j)
        for (std::size_t k = 0; k < in.pms[j].gpu_tags.size(); ++k) {
          if (in.pms[j].gpu_tags[k] != vm.hw_tag()) continue;
          for (int z : feasible_offsets(vm.size(), vm.max_start()))
            opts.push_back({static_cast<int>(j), static_cast<int>(k), z});
        }
      options_.push_back(std::move(opts));
    }
    occupied_.resize(in.pms.size());
    for (std::size_t j = 0; j < in.pms.size(); ++j) occupied_[j].assign(in.pms[j].gpu_tags.size(), 0);
    cpu_.assign(in.pms.size(), 0.0);
    ram_.assign(in.pms.size(), 0.0);
    current_.resize(in.vms.size());
    remaining_weight_.assign(in.vms.size() + 1, 0.0);
    for (std::size_t i = in.vms.size(); i-- > 0;) remaining_weight_[i] = remaining_weight_[i + 1] + in.vms[i].weight;
  }

  double leaves() const {
    double n = 1.0;
    for (const auto& o : options_) n *= static_cast<double>(o.size() + 1);
    return n;
  }

  Solution run() {
    recurse(0);
    Solution s = Solution::from_assignments(best_);
    s.objectives = best_values_;
    return s;
  }

 private:
  void recurse(std::size_t i) {
    if (i == in_.vms.size()) {
      consider();
      return;
    }
    // Acceptance ranks first, so a branch that cannot reach the incumbent's
    // acceptance is dead (equal acceptance may still win on hardware).
    if (have_best_ && std::holds_alternative<Lexicographic>(mode_) &&
        accepted_weight_ + remaining_weight_[i] < best_values_.acceptance - kEps)
      return;
    const Vm& vm = in_.vms[i];
    for (const GpuSlot& slot : options_[i]) {
      // Blocks as a plain bitmask of [z, z + g).
      const unsigned mask = ((1u << vm.size()) - 1u) << slot.start;
      unsigned& occ = occupied_[slot.pm][slot.gpu];
      if (occ & mask) continue;
      if (cpu_[slot.pm] + vm.cpu > in_.pms[slot.pm].cpu_capacity + kEps) continue;
      if (ram_[slot.pm] + vm.ram > in_.pms[slot.pm].ram_capacity + kEps) continue;
      occ |= mask;
      cpu_[slot.pm] += vm.cpu;
      ram_[slot.pm] += vm.ram;
      current_[i] = slot;
      accepted_weight_ += vm.weight;
      recurse(i + 1);
      accepted_weight_ -= vm.weight;
      occ &= ~mask;
      cpu_[slot.pm] -= vm.cpu;
      ram_[slot.pm] -= vm.ram;
    }
    current_[i].reset();
    recurse(i + 1);
  }

  void consider() {
    const ObjectiveValues v = evaluate(in_, Solution::from_assignments(current_));
    if (!have_best_ || better(v, best_values_)) {
      have_best_ = true;
      best_ = current_;
      best_values_ = v;
    }
  }

  bool better(const ObjectiveValues& a, const ObjectiveValues& b) const {
    if (const auto* w = std::get_if<WeightedObjective>(&mode_)) {
      const auto score = [&](const ObjectiveValues& v) {
        return w->acceptance * v.acceptance - w->hardware * v.hardware - w->migration * v.migration;
      };
      return score(a) > score(b) + kEps;
    }
    if (std::abs(a.acceptance - b.acceptance) > kEps) return a.acceptance > b.acceptance;
    if (std::abs(a.hardware - b.hardware) > kEps) return a.hardware < b.hardware;
    return a.migration < b.migration - kEps;
  }

  const Instance& in_;
  const SolveMode& mode_;
  std::vector<std::vector<GpuSlot>> options_;
  std::vector<std::vector<unsigned>> occupied_;
  std::vector<double> cpu_, ram_;
  std::vector<std::optional<GpuSlot>> current_, best_;
  std::vector<double> remaining_weight_;
  double accepted_weight_ = 0.0;
  ObjectiveValues best_values_;
  bool have_best_ = false;
};

}  // namespace

Solution brute_force_solve(const Instance& instance, const SolveMode& mode, const SearchLimits& limits) {
  if (instance.vms.size() > limits.max_vms)
    throw SizeLimitError("instance has " + std::to_string(instance.vms.size()) + " VMs; the exhaustive search allows " +
                         std::to_string(limits.max_vms));
  if (instance.pms.size() > limits.max_pms)
    throw SizeLimitError("instance has " + std::to_string(instance.pms.size()) + " PMs; the exhaustive search allows " +
                         std::to_string(limits.max_pms));
  for (const auto& pm : instance.pms)
    if (pm.gpu_tags.size() > limits.max_gpus_per_pm)
      throw SizeLimitError("a PM has " + std::to_string(pm.gpu_tags.size()) +
                           " GPUs; the exhaustive search allows " + std::to_string(limits.max_gpus_per_pm));
  check_instance(instance);
  Search search(instance, mode);
  if (search.leaves() > limits.max_leaves)
    throw SizeLimitError("search space of about " + format_number(search.leaves()) +
                         " leaves exceeds the limit of " + format_number(limits.max_leaves));
  return search.run();
}

}  // namespace migsim::ilp
