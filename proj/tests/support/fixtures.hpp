#pragma once

// Small hand-sized co-design fixtures shared by the unit suite and the
// acceptance runner. Every resource number on the hpq path is a multiple of
// three so sample_design usage stays a multiple of three, which the exact-cap
// tests rely on; comparator prices are kept tiny so merge-fabric variants
// still fit the micro budget.

#include <optional>

#include <annforge/codesign.hpp>

namespace testsupport {

inline annforge::codesign::PECatalog micro_catalog() {
  namespace cd = annforge::codesign;
  cd::PECatalog cat;
  cat.off_chip_penalty = 2.0;

  cd::PECatalogEntry opq;
  opq.stage = cd::Stage::opq;
  opq.variant = "rot";
  opq.l = 12;
  opq.ii = 1;
  opq.input_ports = 2;
  opq.resources = {0, 0, 30, 30, 3};
  cat.entries.push_back(opq);

  cd::PECatalogEntry ivf;
  ivf.stage = cd::Stage::ivf_dist;
  ivf.variant = "ivf";
  ivf.l = 10;
  ivf.ii = 2;
  ivf.input_ports = 2;
  ivf.resources = {12, 0, 60, 60, 6};
  cat.entries.push_back(ivf);

  cd::PECatalogEntry cells_hpq;
  cells_hpq.stage = cd::Stage::sel_cells;
  cells_hpq.variant = "hpq";
  cells_hpq.queue_base = {0, 0, 6, 6, 0};
  cells_hpq.queue_per_s = {3, 0, 3, 3, 0};
  cells_hpq.max_streams = 3;
  cat.entries.push_back(cells_hpq);

  cd::PECatalogEntry cells_smg = cells_hpq;
  cells_smg.variant = "hsmpqg";
  cells_smg.comparator = {0, 0, 1, 1, 0};
  cells_smg.max_streams = 6;
  cat.entries.push_back(cells_smg);

  cd::PECatalogEntry lut;
  lut.stage = cd::Stage::build_lut;
  lut.variant = "lut";
  lut.l = 8;
  lut.ii = 1;
  lut.input_ports = 2;
  lut.resources = {24, 0, 45, 45, 3};
  cat.entries.push_back(lut);

  cd::PECatalogEntry pq;
  pq.stage = cd::Stage::pq_dist;
  pq.variant = "pq";
  pq.l = 6;
  pq.ii = 1;
  pq.input_ports = 3;
  pq.resources = {9, 0, 30, 30, 3};
  cat.entries.push_back(pq);

  cd::PECatalogEntry selk_hpq;
  selk_hpq.stage = cd::Stage::sel_k;
  selk_hpq.variant = "hpq";
  selk_hpq.queue_base = {0, 0, 6, 6, 0};
  selk_hpq.queue_per_s = {3, 0, 3, 3, 0};
  cat.entries.push_back(selk_hpq);

  cd::PECatalogEntry selk_smg = selk_hpq;
  selk_smg.variant = "hsmpqg";
  selk_smg.comparator = {0, 0, 1, 1, 0};
  cat.entries.push_back(selk_smg);

  return cat;
}

inline annforge::codesign::DeviceBudget micro_budget() {
  annforge::codesign::DeviceBudget b;
  b.totals = {30000, 3000, 1200, 1200, 300};
  b.utilization_cap = 0.6;
  b.frequency_hz = 1.0e8;
  b.infra = {30, 0, 30, 30, 3};
  b.fifo_unit = {3, 0, 3, 3, 0};
  return b;
}

inline annforge::codesign::Workload micro_workload(bool opq_enabled = true) {
  annforge::codesign::Workload wl;
  wl.index_id = "IVF4";
  wl.algo = {4, 2, 2, opq_enabled};
  wl.dim = 8;
  wl.m = 2;
  wl.stats.sizes = {40, 10, 30, 20};
  return wl;
}

inline annforge::codesign::AcceleratorDesign sample_design(
    const annforge::codesign::Workload& wl) {
  namespace cd = annforge::codesign;
  cd::AcceleratorDesign d;
  d.at(cd::Stage::opq) = wl.algo.opq_enabled
                             ? cd::StageChoice{"rot", 1, std::nullopt}
                             : cd::StageChoice{};
  d.at(cd::Stage::ivf_dist) = {"ivf", 2, cd::CachePlacement::on_chip};
  d.at(cd::Stage::sel_cells) = {"hpq", 2, std::nullopt};
  d.at(cd::Stage::build_lut) = {"lut", 2, cd::CachePlacement::off_chip};
  d.at(cd::Stage::pq_dist) = {"pq", 3, std::nullopt};
  d.at(cd::Stage::sel_k) = {"hpq", 6, std::nullopt};
  return d;
}

}  // namespace testsupport
