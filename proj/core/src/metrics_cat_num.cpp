// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "biasaudit/metrics.hpp"
#include "metrics_detail.hpp"
#include "stats.hpp"

namespace biasaudit::metrics {

using detail::make_result;

namespace {

struct Group {
  std::string label;
  std::vector<std::size_t> rows;  // indices into the complete-case arrays
  std::vector<double> y;
  double mean = 0;
};

// Complete cases over (group, outcome[, extra]) and the groups with >= 2 rows.
struct Prepared {
  std::vector<std::string> label;
  std::vector<double> y;
  std::vector<double> mediator;
  std::vector<std::string> stratum;
  std::vector<Group> groups;  // ascending label order
  std::size_t dropped_groups = 0;
};

Prepared prepare(const tabular::Column& g, const tabular::Column& y, const tabular::Column* mediator,
                 const tabular::Column* covariate) {
  if (g.size() != y.size()) throw Error(Errc::InvalidArgument, "columns differ in length");
  Prepared p;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.is_missing(i) || y.is_missing(i)) continue;
    if (mediator && mediator->is_missing(i)) continue;
    if (covariate && covariate->is_missing(i)) continue;
    p.label.push_back(g.text(i));
    p.y.push_back(y.number(i));
    if (mediator) p.mediator.push_back(mediator->number(i));
    if (covariate) p.stratum.push_back(covariate->text(i));
  }
  std::map<std::string, Group> by_label;
  for (std::size_t i = 0; i < p.label.size(); ++i) {
    auto& grp = by_label[p.label[i]];
    grp.label = p.label[i];
    grp.rows.push_back(i);
    grp.y.push_back(p.y[i]);
  }
  for (auto& [label, grp] : by_label) {
    if (grp.rows.size() < 2) {
      ++p.dropped_groups;
      continue;
    }
    grp.mean = stats::mean(grp.y);
    p.groups.push_back(std::move(grp));
  }
  if (p.groups.size() < 2) {
    throw Error(Errc::SingletonGroup,
                fmt::format("'{}' needs at least two categories with two or more observations", g.name()));
  }
  return p;
}

std::vector<double> retained_outcomes(const Prepared& p) {
  std::vector<double> all;
  for (const auto& grp : p.groups) all.insert(all.end(), grp.y.begin(), grp.y.end());
  return all;
}

// The two largest groups; the first is treated. Size ties go to the higher
// group mean so the choice never depends on how categories are named; the
// label decides only when size and mean both tie.
std::pair<const Group*, const Group*> treatment_pair(const Prepared& p) {
  std::vector<const Group*> order;
  for (const auto& grp : p.groups) order.push_back(&grp);
  std::stable_sort(order.begin(), order.end(), [](const Group* a, const Group* b) {
    if (a->rows.size() != b->rows.size()) return a->rows.size() > b->rows.size();
    return a->mean > b->mean;
  });
  return {order[0], order[1]};
}

std::string drop_note(const Prepared& p) {
  return p.dropped_groups ? fmt::format("; {} group(s) with a single observation ignored", p.dropped_groups) : "";
}

}  // namespace

MetricResult detect_cat_num(const tabular::Column& group, const tabular::Column& outcome, std::string_view metric_id,
                            const MetricOptions& opts) {
  detail::require_scenario(metric_id, Scenario::CatNum);
  opts.validate();
  detail::require_numerical(outcome);

  const tabular::Column* mediator = nullptr;
  const tabular::Column* covariate = nullptr;
  if (metric_id == "pse") {
    if (!opts.mediator) throw Error(Errc::MissingMediator, "pse needs a numerical mediator column");
    detail::require_numerical(*opts.mediator);
    if (opts.mediator->size() != group.size()) throw Error(Errc::InvalidArgument, "mediator length mismatch");
    mediator = &*opts.mediator;
  }
  if (metric_id == "causal_effect" && opts.covariate) {
    if (opts.covariate->size() != group.size()) throw Error(Errc::InvalidArgument, "covariate length mismatch");
    covariate = &*opts.covariate;
  }

  const Prepared p = prepare(group, outcome, mediator, covariate);
  const auto all_y = retained_outcomes(p);
  auto r = make_result(metric_id, Scenario::CatNum, all_y.size());

  if (metric_id == "max_abs_mean") {
    const double mu = stats::mean(all_y);
    const double sd = stats::population_sd(all_y);
    if (sd <= 0) throw Error(Errc::ZeroVariance, "outcome has zero variance");
    double worst = 0;
    std::string who;
    for (const auto& grp : p.groups) {
      const double v = std::abs((grp.mean - mu) / sd);
      if (v > worst) {
        worst = v;
        who = grp.label;
      }
    }
    r.raw["N"] = worst;
    r.details = fmt::format("largest standardized group mean in '{}'", who);
  } else if (metric_id == "cohens_d" || metric_id == "standardized_difference") {
    const bool pooled = metric_id == "cohens_d";
    double scale = 0;
    if (!pooled) {
      scale = stats::kMadToSd * stats::mad(all_y);
      if (scale <= 0) throw Error(Errc::ZeroVariance, "median absolute deviation of the outcome is zero");
    }
    double worst = 0;
    std::string pair;
    for (std::size_t a = 0; a < p.groups.size(); ++a) {
      for (std::size_t b = a + 1; b < p.groups.size(); ++b) {
        const auto& ga = p.groups[a];
        const auto& gb = p.groups[b];
        double s = scale;
        if (pooled) {
          const double na = static_cast<double>(ga.y.size());
          const double nb = static_cast<double>(gb.y.size());
          s = std::sqrt(((na - 1) * stats::sample_variance(ga.y) + (nb - 1) * stats::sample_variance(gb.y)) /
                        (na + nb - 2));
          if (s <= 0) {
            if (ga.mean == gb.mean) continue;
            throw Error(Errc::ZeroVariance,
                        fmt::format("groups '{}' and '{}' have zero pooled variance", ga.label, gb.label));
          }
        }
        const double d = std::abs(ga.mean - gb.mean) / s;
        if (d > worst) {
          worst = d;
          pair = ga.label + " vs " + gb.label;
        }
      }
    }
    r.raw[pooled ? "d_max" : "sd_max"] = worst;
    r.details = pair.empty() ? std::string("all group means equal") : "largest gap: " + pair;
  } else if (metric_id == "causal_effect") {
    const auto [treated, control] = treatment_pair(p);
    std::vector<double> pair_y = treated->y;
    pair_y.insert(pair_y.end(), control->y.begin(), control->y.end());
    const double sd = stats::population_sd(pair_y);
    if (sd <= 0) throw Error(Errc::ZeroVariance, "outcome has zero variance");
    double ace = treated->mean - control->mean;
    std::string how = "unadjusted mean difference";
    if (covariate) {
      struct Stratum {
        std::vector<double> t, c;
      };
      std::map<std::string, Stratum> strata;
      for (std::size_t i : treated->rows) strata[p.stratum[i]].t.push_back(p.y[i]);
      for (std::size_t i : control->rows) strata[p.stratum[i]].c.push_back(p.y[i]);
      long double weighted = 0, weight = 0;
      std::size_t used = 0;
      for (const auto& [key, s] : strata) {
        if (s.t.empty() || s.c.empty()) continue;
        const double w = static_cast<double>(s.t.size() + s.c.size());
        weighted += w * (stats::mean(s.t) - stats::mean(s.c));
        weight += w;
        ++used;
      }
      if (used == 0) {
        throw Error(Errc::SingletonGroup, "no covariate stratum contains both treatment and control rows");
      }
      ace = static_cast<double>(weighted / weight);
      how = fmt::format("stratified on {} covariate value(s)", used);
    }
    r.raw["ACE"] = ace;
    r.raw["ACE_std"] = ace / sd;
    r.details = fmt::format("treatment '{}' vs control '{}', {}", treated->label, control->label, how);
  } else {  // pse
    const auto [treated, control] = treatment_pair(p);
    std::vector<double> t, m, y;
    for (std::size_t i : treated->rows) {
      t.push_back(1.0);
      m.push_back(p.mediator[i]);
      y.push_back(p.y[i]);
    }
    for (std::size_t i : control->rows) {
      t.push_back(0.0);
      m.push_back(p.mediator[i]);
      y.push_back(p.y[i]);
    }
    const double sd = stats::population_sd(y);
    if (sd <= 0) throw Error(Errc::ZeroVariance, "outcome has zero variance");
    const double tm = stats::mean(t), mm = stats::mean(m), ym = stats::mean(y);
    long double stt = 0, smm = 0, stm = 0, sty = 0, smy = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double dt = t[i] - tm, dm = m[i] - mm, dy = y[i] - ym;
      stt += dt * dt;
      smm += dm * dm;
      stm += dt * dm;
      sty += dt * dy;
      smy += dm * dy;
    }
    // Mediator model m = a0 + a1 t.
    const double a1 = static_cast<double>(stm / stt);
    // Outcome model y = b0 + b1 t + b2 m, with the degenerate designs resolved
    // explicitly: a constant mediator carries no path, and a mediator fully
    // determined by treatment carries the whole effect.
    double b1 = 0, b2 = 0;
    std::string design = "full outcome model";
    const long double det = stt * smm - stm * stm;
    if (smm <= 1e-12L * std::max<long double>(1, stt)) {
      b1 = static_cast<double>(sty / stt);
      design = "mediator constant";
    } else if (det <= 1e-10L * stt * smm) {
      b2 = static_cast<double>(smy / smm);
      design = "mediator collinear with treatment";
    } else {
      b1 = static_cast<double>((smm * sty - stm * smy) / det);
      b2 = static_cast<double>((stt * smy - stm * sty) / det);
    }
    const double ade = b1;
    const double aie = a1 * b2;
    r.raw["ADE"] = ade;
    r.raw["AIE"] = aie;
    r.raw["total"] = ade + aie;
    r.raw["pse"] = std::max(std::abs(ade), std::abs(aie)) / sd;
    r.n = y.size();
    r.details = fmt::format("treatment '{}' vs control '{}', mediator '{}', {}", treated->label, control->label,
                            opts.mediator->name(), design);
    if (p.groups.size() > 2) r.details += "; treatment binarized to the two largest groups";
  }
  if (metric_id == "causal_effect" && p.groups.size() > 2) r.details += "; two largest groups compared";
  r.details += drop_note(p);
  return r;
}

}  // namespace biasaudit::metrics
