#pragma once

#include <json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annforge/core.hpp"
#include "annforge/index.hpp"
#include "annforge/selection.hpp"

namespace annforge::codesign {

using nlohmann::json;

struct ResourceVec {
  double bram = 0;  // bytes of block RAM
  double uram = 0;  // bytes of ultra RAM
  double lut = 0;
  double ff = 0;
  double dsp = 0;

  ResourceVec& operator+=(const ResourceVec& o) {
    bram += o.bram;
    uram += o.uram;
    lut += o.lut;
    ff += o.ff;
    dsp += o.dsp;
    return *this;
  }

  friend ResourceVec operator+(ResourceVec a, const ResourceVec& b) {
    a += b;
    return a;
  }

  friend ResourceVec operator*(const ResourceVec& a, double f) {
    return {a.bram * f, a.uram * f, a.lut * f, a.ff * f, a.dsp * f};
  }

  bool within(const ResourceVec& limit) const {
    return bram <= limit.bram && uram <= limit.uram && lut <= limit.lut &&
           ff <= limit.ff && dsp <= limit.dsp;
  }

  friend bool operator==(const ResourceVec&, const ResourceVec&) = default;
};

inline void to_json(json& j, const ResourceVec& r) {
  j = {{"bram", r.bram}, {"uram", r.uram}, {"lut", r.lut}, {"ff", r.ff},
       {"dsp", r.dsp}};
}

inline void from_json(const json& j, ResourceVec& r) {
  r.bram = j.value("bram", 0.0);
  r.uram = j.value("uram", 0.0);
  r.lut = j.value("lut", 0.0);
  r.ff = j.value("ff", 0.0);
  r.dsp = j.value("dsp", 0.0);
}

enum class Stage : int {
  opq = 0,
  ivf_dist = 1,
  sel_cells = 2,
  build_lut = 3,
  pq_dist = 4,
  sel_k = 5,
};

inline constexpr int kNumStages = 6;
inline constexpr std::array<const char*, kNumStages> kStageNames = {
    "opq", "ivf_dist", "sel_cells", "build_lut", "pq_dist", "sel_k"};

inline const char* stage_name(Stage s) { return kStageNames[int(s)]; }

inline Stage stage_from_name(const std::string& name) {
  for (int i = 0; i < kNumStages; ++i)
    if (name == kStageNames[i]) return Stage(i);
  throw FormatError("unknown stage name: " + name);
}

inline bool is_selection_stage(Stage s) {
  return s == Stage::sel_cells || s == Stage::sel_k;
}

/// One processing-element or selection-fabric variant. Computation variants
/// carry (l, ii, input_ports, resources); selection variants carry affine
/// per-queue costs in the queue capacity s, plus a comparator unit cost for
/// the sort-merge fabric.
struct PECatalogEntry {
  Stage stage = Stage::opq;
  std::string variant;
  double l = 1;
  double ii = 1;
  int input_ports = 2;
  ResourceVec resources;      // per PE
  ResourceVec queue_base;     // selection: per queue, constant part
  ResourceVec queue_per_s;    // selection: per queue, per unit of capacity
  ResourceVec comparator;     // selection: per compare-swap unit
  std::uint32_t max_streams = 4;  // sel_cells enumeration bound
};

struct PECatalog {
  std::vector<PECatalogEntry> entries;
  double off_chip_penalty = 2.0;  // multiplies ii when the cache is off-chip

  std::vector<const PECatalogEntry*> entries_for(Stage s) const {
    std::vector<const PECatalogEntry*> out;
    for (const auto& e : entries)
      if (e.stage == s) out.push_back(&e);
    return out;
  }

  const PECatalogEntry* find(Stage s, const std::string& variant) const {
    for (const auto& e : entries)
      if (e.stage == s && e.variant == variant) return &e;
    return nullptr;
  }
};

struct DeviceBudget {
  ResourceVec totals;
  double utilization_cap = 0.6;   // fraction of each resource usable
  double frequency_hz = 1.4e8;
  ResourceVec infra;              // shell: controllers, interconnect
  ResourceVec fifo_unit;          // one inter-stage FIFO

  ResourceVec capacity() const { return totals * utilization_cap; }
};

struct AlgoParams {
  std::uint32_t nlist = 0;
  std::uint32_t nprobe = 0;
  std::uint32_t k = 0;
  bool opq_enabled = false;
};

inline void to_json(json& j, const AlgoParams& p) {
  j = {{"nlist", p.nlist}, {"nprobe", p.nprobe}, {"k", p.k},
       {"opq_enabled", p.opq_enabled}};
}

inline void from_json(const json& j, AlgoParams& p) {
  j.at("nlist").get_to(p.nlist);
  j.at("nprobe").get_to(p.nprobe);
  j.at("k").get_to(p.k);
  j.at("opq_enabled").get_to(p.opq_enabled);
}

enum class CachePlacement { on_chip, off_chip };

inline const char* cache_name(CachePlacement c) {
  return c == CachePlacement::on_chip ? "on_chip" : "off_chip";
}

/// Per-stage microarchitecture choice. pe_count means: processing elements
/// for computation stages; level-1 queue count (hpq) or input-stream count
/// (hsmpqg) for selection stages. The sel_k count is derived from the
/// pq_dist PE count: each PE is one producer stream.
struct StageChoice {
  std::string variant;
  std::uint32_t pe_count = 0;
  std::optional<CachePlacement> cache;
};

struct AcceleratorDesign {
  std::array<StageChoice, kNumStages> stages;

  StageChoice& at(Stage s) { return stages[int(s)]; }
  const StageChoice& at(Stage s) const { return stages[int(s)]; }
};

/// Everything the models need to know about one candidate index.
struct Workload {
  std::string index_id;
  AlgoParams algo;
  std::uint32_t dim = 0;
  std::uint32_t m = 0;
  index::CellStats stats;
};

// Compare-swap unit counts of the sort-merge networks.
inline std::uint64_t sorter_comparators(std::uint32_t w) {
  return std::uint64_t(w / 2) * selection::bitonic_sort_latency(w);
}

inline std::uint64_t merger_comparators(std::uint32_t w) {
  const std::uint64_t lg = std::uint64_t(std::countr_zero(w));
  return std::uint64_t(w) + std::uint64_t(w / 2) * lg;
}

namespace detail {

inline std::uint32_t selection_capacity(Stage stage, const AlgoParams& algo) {
  return stage == Stage::sel_cells ? algo.nprobe : algo.k;
}

inline ResourceVec queue_cost(const PECatalogEntry& e, std::uint32_t s) {
  return e.queue_base + e.queue_per_s * double(s);
}

// Resource contribution of one stage choice, FIFOs and cache bytes included.
inline ResourceVec stage_contribution(const StageChoice& c, Stage stage,
                                      const Workload& wl,
                                      const PECatalog& cat,
                                      const DeviceBudget& bud) {
  ResourceVec out;
  if (c.pe_count == 0) return out;
  const PECatalogEntry* e = cat.find(stage, c.variant);
  if (!e)
    throw InvalidArgument(std::string("unknown variant '") + c.variant +
                          "' for stage " + stage_name(stage));

  if (is_selection_stage(stage)) {
    const std::uint32_t s = selection_capacity(stage, wl.algo);
    if (c.variant == "hsmpqg") {
      const auto cfg = selection::HSMPQGConfig::plan(c.pe_count, s);
      const double comps =
          double(cfg.num_sorters) * double(sorter_comparators(cfg.sort_width)) +
          double(cfg.num_mergers) * double(merger_comparators(cfg.sort_width));
      const std::uint32_t tail_queues = 2 * s + 1;
      out += e->comparator * comps;
      out += queue_cost(*e, s) * double(tail_queues);
      out += bud.fifo_unit *
             double(cfg.num_sorters + cfg.num_mergers + tail_queues);
    } else {
      const std::uint32_t queues = c.pe_count + 1;  // level-1 plus level-2
      out += queue_cost(*e, s) * double(queues);
      out += bud.fifo_unit * double(queues);
    }
    return out;
  }

  out += e->resources * double(c.pe_count);
  out += bud.fifo_unit * double(c.pe_count * std::uint32_t(e->input_ports));
  if (c.cache == CachePlacement::on_chip) {
    if (stage == Stage::ivf_dist)
      out.bram += double(wl.algo.nlist) * double(wl.dim) * 4.0;
    else if (stage == Stage::build_lut)
      out.bram += double(wl.m) * 256.0 * double(wl.dim / wl.m) * 4.0;
  }
  return out;
}

}  // namespace detail

/// Total device usage: shell plus every stage's PEs, FIFOs, and caches.
inline ResourceVec resource_usage(const AcceleratorDesign& d,
                                  const PECatalog& cat,
                                  const DeviceBudget& bud,
                                  const Workload& wl) {
  ResourceVec usage = bud.infra;
  for (int s = 0; s < kNumStages; ++s)
    usage += detail::stage_contribution(d.stages[s], Stage(s), wl, cat, bud);
  return usage;
}

/// Structural checks plus the utilization cap (inclusive at the boundary).
inline bool is_valid(const AcceleratorDesign& d, const PECatalog& cat,
                     const DeviceBudget& bud, const Workload& wl) {
  const StageChoice& opq = d.at(Stage::opq);
  if (wl.algo.opq_enabled) {
    if (opq.pe_count != 1 || !cat.find(Stage::opq, opq.variant)) return false;
  } else if (opq.pe_count != 0) {
    return false;
  }

  for (Stage s : {Stage::ivf_dist, Stage::build_lut, Stage::pq_dist}) {
    const StageChoice& c = d.at(s);
    if (c.pe_count < 1 || !cat.find(s, c.variant)) return false;
  }
  if (!d.at(Stage::ivf_dist).cache || !d.at(Stage::build_lut).cache)
    return false;

  const StageChoice& cells = d.at(Stage::sel_cells);
  if (cells.pe_count < 1 || !cat.find(Stage::sel_cells, cells.variant))
    return false;
  if (cells.variant == "hsmpqg" && wl.algo.nprobe >= cells.pe_count)
    return false;

  const StageChoice& selk = d.at(Stage::sel_k);
  if (!cat.find(Stage::sel_k, selk.variant)) return false;
  const std::uint32_t producers = d.at(Stage::pq_dist).pe_count;
  const std::uint32_t expect =
      selk.variant == "hsmpqg" ? producers : 2 * producers;
  if (selk.pe_count != expect) return false;
  if (selk.variant == "hsmpqg" && wl.algo.k >= producers) return false;

  ResourceVec usage;
  try {
    usage = resource_usage(d, cat, bud, wl);
  } catch (const InvalidArgument&) {
    return false;
  }
  return usage.within(bud.capacity());
}

/// Queries per second of one pipelined PE: freq / (l + (n - 1) * ii).
inline double pe_qps(double l, double ii, double n, double freq_hz) {
  if (l < 1 || ii < 1 || n < 1 || freq_hz <= 0)
    throw InvalidArgument("pe_qps: l, ii, n must be >= 1 and freq positive");
  return freq_hz / (l + (n - 1) * ii);
}

/// Per-query cycles of one stage under the given design and workload.
inline double stage_cycles(const AcceleratorDesign& d, Stage stage,
                           const Workload& wl, const PECatalog& cat) {
  const StageChoice& c = d.at(stage);
  const AlgoParams& a = wl.algo;

  if (stage == Stage::opq && !a.opq_enabled) return 0.0;
  const PECatalogEntry* e = cat.find(stage, c.variant);
  if (!e)
    throw InvalidArgument(std::string("unknown variant '") + c.variant +
                          "' for stage " + stage_name(stage));
  if (c.pe_count < 1)
    throw InvalidArgument(std::string("stage ") + stage_name(stage) +
                          " needs at least one element");

  auto penalized_ii = [&](const StageChoice& sc) {
    return sc.cache == CachePlacement::off_chip ? e->ii * cat.off_chip_penalty
                                                : e->ii;
  };

  switch (stage) {
    case Stage::opq:
      return e->l + (double(wl.dim) - 1.0) * e->ii;
    case Stage::ivf_dist: {
      const double n = std::ceil(double(a.nlist) / double(c.pe_count));
      return e->l + (std::max(n, 1.0) - 1.0) * penalized_ii(c);
    }
    case Stage::build_lut: {
      const double n =
          double(a.nprobe) * 256.0 / double(c.pe_count);
      return e->l + (std::max(n, 1.0) - 1.0) * penalized_ii(c);
    }
    case Stage::pq_dist: {
      const double n =
          index::expected_scanned(wl.stats, a.nprobe) / double(c.pe_count);
      return e->l + (std::max(n, 1.0) - 1.0) * e->ii;
    }
    case Stage::sel_cells: {
      const double total = double(a.nlist);
      if (c.variant == "hsmpqg")
        return double(selection::hsmpqg_cycles(total, c.pe_count, a.nprobe));
      return double(selection::hpq_cycles(total, c.pe_count, a.nprobe));
    }
    case Stage::sel_k: {
      const double total = index::expected_scanned(wl.stats, a.nprobe);
      if (c.variant == "hsmpqg")
        return double(selection::hsmpqg_cycles(total, c.pe_count, a.k));
      return double(selection::hpq_cycles(total, c.pe_count, a.k));
    }
  }
  throw InvalidArgument("stage_cycles: unreachable stage");
}

/// Stage throughput in queries per second; infinite for an absent stage.
inline double stage_qps(const AcceleratorDesign& d, Stage stage,
                        const Workload& wl, const PECatalog& cat,
                        const DeviceBudget& bud) {
  const double cycles = stage_cycles(d, stage, wl, cat);
  if (cycles <= 0.0) return std::numeric_limits<double>::infinity();
  return bud.frequency_hz / cycles;
}

/// Accelerator throughput: the slowest stage bounds the pipeline.
inline double predict_qps(const AcceleratorDesign& d, const Workload& wl,
                          const PECatalog& cat, const DeviceBudget& bud) {
  double qps = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kNumStages; ++s)
    qps = std::min(qps, stage_qps(d, Stage(s), wl, cat, bud));
  return qps;
}

namespace detail {

inline std::uint32_t cache_rank(const std::optional<CachePlacement>& c) {
  if (!c) return 0;
  return c == CachePlacement::on_chip ? 0 : 1;
}

inline std::uint64_t variant_rank(const PECatalog& cat, Stage s,
                                  const std::string& variant) {
  const auto list = cat.entries_for(s);
  for (std::size_t i = 0; i < list.size(); ++i)
    if (list[i]->variant == variant) return i;
  return list.size();
}

}  // namespace detail

/// Canonical ordering key: stage fields in pipeline order.
inline std::vector<std::uint64_t> design_tuple(const AcceleratorDesign& d,
                                               const PECatalog& cat) {
  std::vector<std::uint64_t> t;
  for (int s = 0; s < kNumStages; ++s) {
    const StageChoice& c = d.stages[s];
    t.push_back(c.pe_count == 0
                    ? 0
                    : 1 + detail::variant_rank(cat, Stage(s), c.variant));
    t.push_back(c.pe_count);
    t.push_back(detail::cache_rank(c.cache));
  }
  return t;
}

inline constexpr std::uint32_t kMaxPeCount = 1024;

namespace detail {

/// Visits every valid design in ascending design-tuple order without
/// materializing the space. Counts with a resource cost that already
/// exceeds the capped budget prune their loop, which is sound because
/// usage is additive and monotone in every count.
template <typename Fn>
inline void for_each_valid_design(const PECatalog& cat,
                                  const DeviceBudget& bud, const Workload& wl,
                                  Fn&& visit) {
  const ResourceVec cap = bud.capacity();
  if (!bud.infra.within(cap)) return;

  const auto opq_vars = cat.entries_for(Stage::opq);
  const auto ivf_vars = cat.entries_for(Stage::ivf_dist);
  const auto cells_vars = cat.entries_for(Stage::sel_cells);
  const auto lut_vars = cat.entries_for(Stage::build_lut);
  const auto pq_vars = cat.entries_for(Stage::pq_dist);
  const auto selk_vars = cat.entries_for(Stage::sel_k);

  AcceleratorDesign d;
  auto contrib = [&](Stage s) {
    return detail::stage_contribution(d.at(s), s, wl, cat, bud);
  };

  std::vector<const PECatalogEntry*> opq_options = opq_vars;
  if (!wl.algo.opq_enabled) opq_options = {nullptr};

  for (const PECatalogEntry* opq_e : opq_options) {
    d.at(Stage::opq) = opq_e ? StageChoice{opq_e->variant, 1, std::nullopt}
                             : StageChoice{};
    const ResourceVec u_opq = bud.infra + contrib(Stage::opq);
    if (!u_opq.within(cap)) continue;

    for (const PECatalogEntry* ivf_e : ivf_vars) {
      for (std::uint32_t ivf_pe = 1; ivf_pe <= kMaxPeCount; ++ivf_pe) {
        bool ivf_any = false;
        for (CachePlacement ivf_cache :
             {CachePlacement::on_chip, CachePlacement::off_chip}) {
          d.at(Stage::ivf_dist) = {ivf_e->variant, ivf_pe, ivf_cache};
          const ResourceVec u_ivf = u_opq + contrib(Stage::ivf_dist);
          if (!u_ivf.within(cap)) continue;
          ivf_any = true;

          for (const PECatalogEntry* cells_e : cells_vars) {
            for (std::uint32_t cells_n = 1; cells_n <= cells_e->max_streams;
                 ++cells_n) {
              if (cells_e->variant == "hsmpqg" && wl.algo.nprobe >= cells_n)
                continue;
              d.at(Stage::sel_cells) = {cells_e->variant, cells_n,
                                        std::nullopt};
              const ResourceVec u_cells = u_ivf + contrib(Stage::sel_cells);
              if (!u_cells.within(cap)) break;

              for (const PECatalogEntry* lut_e : lut_vars) {
                for (std::uint32_t lut_pe = 1; lut_pe <= kMaxPeCount;
                     ++lut_pe) {
                  bool lut_any = false;
                  for (CachePlacement lut_cache :
                       {CachePlacement::on_chip, CachePlacement::off_chip}) {
                    d.at(Stage::build_lut) = {lut_e->variant, lut_pe,
                                              lut_cache};
                    const ResourceVec u_lut = u_cells + contrib(Stage::build_lut);
                    if (!u_lut.within(cap)) continue;
                    lut_any = true;

                    for (const PECatalogEntry* pq_e : pq_vars) {
                      for (std::uint32_t pq_pe = 1; pq_pe <= kMaxPeCount;
                           ++pq_pe) {
                        d.at(Stage::pq_dist) = {pq_e->variant, pq_pe,
                                                std::nullopt};
                        const ResourceVec u_pq = u_lut + contrib(Stage::pq_dist);
                        if (!u_pq.within(cap)) break;

                        bool selk_any = false;
                        for (const PECatalogEntry* selk_e : selk_vars) {
                          const bool merge_fabric =
                              selk_e->variant == "hsmpqg";
                          if (merge_fabric && wl.algo.k >= pq_pe) continue;
                          d.at(Stage::sel_k) = {
                              selk_e->variant,
                              merge_fabric ? pq_pe : 2 * pq_pe, std::nullopt};
                          const ResourceVec u_all = u_pq + contrib(Stage::sel_k);
                          if (!u_all.within(cap)) continue;
                          selk_any = true;
                          visit(d);
                        }
                        // A larger pq_pe only grows the derived sel_k
                        // fabric; once nothing fits, stop raising it.
                        if (!selk_any && pq_pe > wl.algo.k) break;
                      }
                    }
                  }
                  if (!lut_any) break;
                }
              }
            }
          }
        }
        if (!ivf_any) break;
      }
    }
  }
}

}  // namespace detail

/// Every valid design, in ascending design-tuple order.
inline std::vector<AcceleratorDesign> enumerate_designs(
    const PECatalog& cat, const DeviceBudget& bud, const Workload& wl) {
  std::vector<AcceleratorDesign> out;
  detail::for_each_valid_design(
      cat, bud, wl, [&](const AcceleratorDesign& d) { out.push_back(d); });
  return out;
}

struct DesignManifest {
  std::string index_id;
  AlgoParams algo;
  AcceleratorDesign design;
  double predicted_qps = 0;
  std::map<std::string, double> stage_qps;  // absent stages omitted
  ResourceVec usage;
  ResourceVec fractions;
  std::uint32_t dim = 0;
  std::uint32_t m = 0;
};

inline void to_json(json& j, const StageChoice& c) {
  j = json{{"variant", c.variant}, {"pe_count", c.pe_count}};
  if (c.cache) j["cache"] = cache_name(*c.cache);
}

inline void from_json(const json& j, StageChoice& c) {
  c.variant = j.value("variant", std::string{});
  c.pe_count = j.value("pe_count", 0u);
  if (j.contains("cache"))
    c.cache = j.at("cache").get<std::string>() == "on_chip"
                  ? CachePlacement::on_chip
                  : CachePlacement::off_chip;
  else
    c.cache = std::nullopt;
}

inline void to_json(json& j, const AcceleratorDesign& d) {
  j = json::object();
  for (int s = 0; s < kNumStages; ++s) j[kStageNames[s]] = d.stages[s];
}

inline void from_json(const json& j, AcceleratorDesign& d) {
  for (int s = 0; s < kNumStages; ++s)
    if (j.contains(kStageNames[s])) j.at(kStageNames[s]).get_to(d.stages[s]);
}

inline void to_json(json& j, const DesignManifest& man) {
  j = json{{"index_id", man.index_id},
           {"algo", man.algo},
           {"design", man.design},
           {"predicted_qps", man.predicted_qps},
           {"stage_qps", man.stage_qps},
           {"resource_usage", man.usage},
           {"resource_fractions", man.fractions},
           {"dim", man.dim},
           {"m", man.m}};
}

inline void from_json(const json& j, DesignManifest& man) {
  j.at("index_id").get_to(man.index_id);
  j.at("algo").get_to(man.algo);
  j.at("design").get_to(man.design);
  j.at("predicted_qps").get_to(man.predicted_qps);
  j.at("stage_qps").get_to(man.stage_qps);
  j.at("resource_usage").get_to(man.usage);
  j.at("resource_fractions").get_to(man.fractions);
  j.at("dim").get_to(man.dim);
  j.at("m").get_to(man.m);
}

inline DesignManifest make_manifest(const AcceleratorDesign& d,
                                    const Workload& wl, const PECatalog& cat,
                                    const DeviceBudget& bud) {
  DesignManifest man;
  man.index_id = wl.index_id;
  man.algo = wl.algo;
  man.design = d;
  man.dim = wl.dim;
  man.m = wl.m;
  man.usage = resource_usage(d, cat, bud, wl);
  man.fractions = ResourceVec{
      man.usage.bram / bud.totals.bram, man.usage.uram / bud.totals.uram,
      man.usage.lut / bud.totals.lut, man.usage.ff / bud.totals.ff,
      man.usage.dsp / bud.totals.dsp};
  double min_qps = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kNumStages; ++s) {
    const double q = stage_qps(d, Stage(s), wl, cat, bud);
    if (std::isinf(q)) continue;
    man.stage_qps[kStageNames[s]] = q;
    min_qps = std::min(min_qps, q);
  }
  man.predicted_qps = min_qps;
  return man;
}

/// Exhaustive argmax of predicted throughput over every (workload, valid
/// design) pair. Ties prefer the smaller design tuple, then the smaller
/// nlist, then earlier workload order. Empty optional means infeasible.
inline std::optional<DesignManifest> co_design(
    const std::vector<Workload>& workloads, const PECatalog& cat,
    const DeviceBudget& bud) {
  struct Best {
    double qps;
    std::vector<std::uint64_t> tuple;
    std::uint32_t nlist;
    std::size_t order;
    AcceleratorDesign design;
    const Workload* wl;
  };
  std::optional<Best> best;

  for (std::size_t i = 0; i < workloads.size(); ++i) {
    const Workload& wl = workloads[i];
    detail::for_each_valid_design(cat, bud, wl, [&](const AcceleratorDesign& d) {
      const double qps = predict_qps(d, wl, cat, bud);
      if (best && qps < best->qps) return;
      auto tuple = design_tuple(d, cat);
      const bool better =
          !best || qps > best->qps ||
          (qps == best->qps &&
           (tuple < best->tuple ||
            (tuple == best->tuple && (wl.algo.nlist < best->nlist ||
                                      (wl.algo.nlist == best->nlist &&
                                       i < best->order)))));
      if (better)
        best = Best{qps, std::move(tuple), wl.algo.nlist, i, d, &wl};
    });
  }
  if (!best) return std::nullopt;
  return make_manifest(best->design, *best->wl, cat, bud);
}

inline void emit_manifest(const DesignManifest& man,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << json(man).dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

inline DesignManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("bad manifest JSON in " + path.string() + ": " +
                      e.what());
  }
  DesignManifest man;
  try {
    j.get_to(man);
  } catch (const json::exception& e) {
    throw FormatError("bad manifest fields in " + path.string() + ": " +
                      e.what());
  }
  double min_qps = std::numeric_limits<double>::infinity();
  for (const auto& [name, q] : man.stage_qps) min_qps = std::min(min_qps, q);
  if (!(std::abs(man.predicted_qps - min_qps) <=
        1e-9 * std::max(1.0, std::abs(min_qps))))
    throw FormatError("manifest predicted_qps does not match stage minimum in " +
                      path.string());
  return man;
}

inline void to_json(json& j, const PECatalogEntry& e) {
  j = json{{"stage", stage_name(e.stage)}, {"variant", e.variant}};
  if (is_selection_stage(e.stage)) {
    j["queue_base"] = e.queue_base;
    j["queue_per_s"] = e.queue_per_s;
    if (e.variant == "hsmpqg") j["comparator"] = e.comparator;
    if (e.stage == Stage::sel_cells) j["max_streams"] = e.max_streams;
  } else {
    j["l"] = e.l;
    j["ii"] = e.ii;
    j["input_ports"] = e.input_ports;
    j["resources"] = e.resources;
  }
}

inline void from_json(const json& j, PECatalogEntry& e) {
  e.stage = stage_from_name(j.at("stage").get<std::string>());
  e.variant = j.at("variant").get<std::string>();
  if (is_selection_stage(e.stage)) {
    j.at("queue_base").get_to(e.queue_base);
    j.at("queue_per_s").get_to(e.queue_per_s);
    if (j.contains("comparator")) j.at("comparator").get_to(e.comparator);
    e.max_streams = j.value("max_streams", 4u);
    e.l = 1;
    e.ii = 2;
  } else {
    e.l = j.at("l").get<double>();
    e.ii = j.at("ii").get<double>();
    e.input_ports = j.value("input_ports", 2);
    j.at("resources").get_to(e.resources);
    if (e.l < 1 || e.ii < 1)
      throw FormatError("catalog entry " + e.variant +
                        ": l and ii must be >= 1");
  }
}

inline void to_json(json& j, const PECatalog& cat) {
  j = json{{"off_chip_penalty", cat.off_chip_penalty},
           {"entries", cat.entries}};
}

inline void from_json(const json& j, PECatalog& cat) {
  cat.off_chip_penalty = j.value("off_chip_penalty", 2.0);
  j.at("entries").get_to(cat.entries);
}

inline void to_json(json& j, const DeviceBudget& b) {
  j = json{{"totals", b.totals},
           {"utilization_cap", b.utilization_cap},
           {"frequency_hz", b.frequency_hz},
           {"infra", b.infra},
           {"fifo_unit", b.fifo_unit}};
}

inline void from_json(const json& j, DeviceBudget& b) {
  j.at("totals").get_to(b.totals);
  b.utilization_cap = j.value("utilization_cap", 0.6);
  b.frequency_hz = j.value("frequency_hz", 1.4e8);
  j.at("infra").get_to(b.infra);
  j.at("fifo_unit").get_to(b.fifo_unit);
}

template <typename T>
inline T load_config(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad ") + what + " JSON in " +
                      path.string() + ": " + e.what());
  }
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad ") + what + " fields in " +
                      path.string() + ": " + e.what());
  }
}

inline PECatalog load_catalog(const std::filesystem::path& path) {
  return load_config<PECatalog>(path, "catalog");
}

inline DeviceBudget load_budget(const std::filesystem::path& path) {
  return load_config<DeviceBudget>(path, "budget");
}

/// Plausible constants for a 128-dimensional, 16-byte-code geometry on an
/// HBM accelerator card. Mirrors data/catalog_default.json.
inline PECatalog default_catalog() {
  PECatalog cat;
  cat.off_chip_penalty = 2.0;

  PECatalogEntry opq;
  opq.stage = Stage::opq;
  opq.variant = "matvec";
  opq.l = 135;  // dim + log2(dim) for dim = 128
  opq.ii = 1;
  opq.input_ports = 2;
  opq.resources = {0, 0, 2600, 3600, 16};
  cat.entries.push_back(opq);

  PECatalogEntry ivf;
  ivf.stage = Stage::ivf_dist;
  ivf.variant = "l2tree";
  ivf.l = 64;
  ivf.ii = 8;  // one 128-float centroid every 8 cycles at 16 lanes
  ivf.input_ports = 2;
  ivf.resources = {4096, 0, 9000, 12000, 64};
  cat.entries.push_back(ivf);

  PECatalogEntry cells;
  cells.stage = Stage::sel_cells;
  cells.variant = "hpq";
  cells.queue_base = {0, 0, 128, 256, 0};
  cells.queue_per_s = {8, 0, 224, 256, 0};
  cells.max_streams = 4;
  cat.entries.push_back(cells);

  PECatalogEntry lut;
  lut.stage = Stage::build_lut;
  lut.variant = "l2tree";
  lut.l = 32;
  lut.ii = 4;  // one 8-float table row every 4 cycles
  lut.input_ports = 2;
  lut.resources = {8192, 0, 6800, 9000, 24};
  cat.entries.push_back(lut);

  PECatalogEntry pq;
  pq.stage = Stage::pq_dist;
  pq.variant = "lutcore";
  pq.l = 32;  // 2m for m = 16
  pq.ii = 1;
  pq.input_ports = 3;
  pq.resources = {16384, 0, 5500, 7000, 34};
  cat.entries.push_back(pq);

  PECatalogEntry selk_hpq;
  selk_hpq.stage = Stage::sel_k;
  selk_hpq.variant = "hpq";
  selk_hpq.queue_base = {0, 0, 128, 256, 0};
  selk_hpq.queue_per_s = {8, 0, 224, 256, 0};
  cat.entries.push_back(selk_hpq);

  PECatalogEntry selk_smg;
  selk_smg.stage = Stage::sel_k;
  selk_smg.variant = "hsmpqg";
  selk_smg.queue_base = {0, 0, 128, 256, 0};
  selk_smg.queue_per_s = {8, 0, 224, 256, 0};
  selk_smg.comparator = {0, 0, 250, 300, 0};
  cat.entries.push_back(selk_smg);

  return cat;
}

/// HBM card budget: BRAM/URAM in bytes, cap at 60%, 140 MHz clock.
/// Mirrors data/budget_default.json.
inline DeviceBudget default_budget() {
  DeviceBudget b;
  b.totals = {9289728, 35389440, 1303680, 2607360, 9024};
  b.utilization_cap = 0.6;
  b.frequency_hz = 1.4e8;
  b.infra = {262144, 0, 120000, 150000, 96};
  b.fifo_unit = {1024, 0, 50, 100, 0};
  return b;
}

}  // namespace annforge::codesign
