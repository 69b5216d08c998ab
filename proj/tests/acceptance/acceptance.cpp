// One PASS/FAIL line per acceptance criterion; supporting numbers are printed
// on indented lines beneath. Exit status is 1 when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "cli.hpp"
#include "convo/audit.hpp"
#include "convo/conformal.hpp"
#include "convo/corners.hpp"
#include "convo/epipolar.hpp"
#include "convo/experiments.hpp"
#include "convo/network.hpp"
#include "convo/optical_flow.hpp"
#include "test_support.hpp"

namespace {

using namespace convo;
namespace fs = std::filesystem;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail, double seconds) {
  if (!pass) ++failures;
  std::printf("%s %-22s %s (%.1fs)\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
}

void note(const std::string& line) {
  std::printf("    %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

template <class F>
void timed(const std::string& name, F body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("threw: ") + e.what();
  }
  report(pass, name, detail, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

const ResultRow& row_of(const ResultTable& t, const std::string& condition, std::uint64_t seed) {
  for (const ResultRow& r : t.rows())
    if (r.condition == condition && r.seed == seed) return r;
  throw std::runtime_error("missing row " + condition);
}

bool coverage_audit_criterion(std::string& detail) {
  const AuditReport r = run_audit(ExperimentConfig{}, AuditOptions{0.1, 99, 400, 500, 300});
  for (const HeadAudit& h : r.heads) {
    if (h.excluded) {
      note(h.name + ": constant head, not calibrated");
      continue;
    }
    note(h.name + fmt(": mean %.4f in [%.4f, %.4f] (binomial SE %.4f, ", h.mean, h.lower, h.upper, h.binomial_se) +
         fmt("empirical SE %.4f)", h.empirical_se));
  }
  detail = fmt("n=99 alpha=0.1 500 resplits, nominal %.4f", r.nominal);
  return r.passed();
}

bool quantile_rule_criterion(std::string& detail) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u;
  int beyond = 0, bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const double alpha = trial % 10 == 0 ? 0.5 / static_cast<double>(n + 1) : 0.005 + 0.4 * u(rng);
    std::vector<double> s(n);
    for (double& x : s) x = u(rng);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(std::ceil((static_cast<double>(n) + 1.0) * (1.0 - alpha) - 1e-12));
    const double expected = rank > n ? 1.0 : sorted[rank - 1];
    if (rank > n) ++beyond;
    if (conformal_quantile(s, alpha) != expected) ++bad;
  }
  detail = "100 random (n, alpha), " + std::to_string(beyond) + " beyond n, " + std::to_string(bad) + " mismatches";
  return bad == 0 && beyond > 0;
}

bool epipolar_criterion(std::string& detail) {
  std::mt19937_64 rng(77);
  double worst_rot = 0, worst_cos = 1, worst_res = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const test::Scenario s = test::random_scenario(rng, 40);
    const Mat3 e = estimate_essential(s.corr);
    const RelativeMotion m = decompose_essential(e, s.corr);
    worst_rot = std::max(worst_rot, rotation_angle_between(m.rotation, s.motion.rotation));
    worst_cos = std::min(worst_cos, std::abs(m.translation.dot(s.motion.translation)));
    worst_res = std::max(worst_res, max_epipolar_residual(e, s.corr));
  }
  detail = fmt("max rot err %.2e rad, min |cos| 1-%.2e, max residual %.2e", worst_rot, 1.0 - worst_cos, worst_res);
  return worst_rot < 1e-6 && worst_cos > 1.0 - 1e-9 && worst_res < 1e-9;
}

bool flow_criterion(std::string& detail) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586), mag(0.0, 5.0);
  double worst = 0.0;
  std::size_t tracked = 0, total = 0;
  int frames_ok = 0;
  for (int frame = 0; frame < 50; ++frame) {
    const double a = angle(rng), m = mag(rng);
    const double dx = m * std::cos(a), dy = m * std::sin(a);
    const auto seed = static_cast<std::uint64_t>(1000 + frame);
    const Frame f0 = test::textured_frame(96, 96, 0.0, 0.0, seed);
    const Frame f1 = test::textured_frame(96, 96, dx, dy, seed);
    std::vector<Eigen::Vector2d> pts;
    for (const Corner& c : harris_corners(f0, 50))
      if (c.pixel.minCoeff() >= 12 && c.pixel.maxCoeff() <= 83) pts.push_back(c.pixel);
    std::size_t ok = 0;
    for (const TrackResult& t : lucas_kanade(f0, f1, pts)) {
      if (!t.ok()) continue;
      ++ok;
      worst = std::max(worst, (t.displacement - Eigen::Vector2d(dx, dy)).norm());
    }
    tracked += ok;
    total += pts.size();
    if (ok >= 8) ++frames_ok;
  }
  detail = fmt("max error %.3f px over %.0f/%.0f tracks, %.0f/50 frames with >= 8 tracks", worst,
               static_cast<double>(tracked), static_cast<double>(total), frames_ok);
  return worst < 0.2 && frames_ok == 50;
}

bool gradient_criterion(std::string& detail) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n;
  double worst = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const Eigen::Index inputs = 2 + static_cast<Eigen::Index>(rng() % 5);
    const Eigen::Index hidden = instance % 5 == 0 ? 0 : 1 + static_cast<Eigen::Index>(rng() % 6);
    HeadLayout layout;
    Eigen::Index offset = 0;
    const int heads = 1 + static_cast<int>(rng() % 3);
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 4);
      layout.offsets.push_back(offset);
      layout.sizes.push_back(k);
      layout.active.push_back(true);
      offset += k;
    }
    const Mlp net(inputs, hidden, offset);
    const Eigen::Index samples = 3 + static_cast<Eigen::Index>(rng() % 6);
    Eigen::MatrixXd x(samples, inputs);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    Eigen::MatrixXi labels(samples, heads);
    for (Eigen::Index r = 0; r < samples; ++r)
      for (int h = 0; h < heads; ++h)
        labels(r, h) = static_cast<int>(rng() % static_cast<std::uint64_t>(layout.sizes[static_cast<std::size_t>(h)]));
    Eigen::VectorXd p(net.parameter_count());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = 0.7 * n(rng);
    const double wd = 0.01 * static_cast<double>(instance % 3);
    Eigen::VectorXd grad;
    cross_entropy_objective(net, layout, x, labels, wd, p, &grad);
    const double h = 1e-6;
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      Eigen::VectorXd a = p, b = p;
      a(i) += h;
      b(i) -= h;
      const double fd = (cross_entropy_objective(net, layout, x, labels, wd, a, nullptr) -
                         cross_entropy_objective(net, layout, x, labels, wd, b, nullptr)) /
                        (2 * h);
      num += (fd - grad(i)) * (fd - grad(i));
      den += fd * fd;
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
  }
  detail = fmt("20 instances, max relative error %.2e", worst);
  return worst < 1e-4;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool determinism_criterion(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / ("convo_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  std::ostringstream out, err;
  bool same = true;
  for (const std::string study : {"sample", "capacity", "noise"}) {
    for (const char* run : {"a", "b"}) {
      const int code = cli::run({"experiment", "--study", study, "--seed", "7", "--seeds", "1", "--dir", (dir / run).string()},
                                out, err);
      if (code != 0) throw std::runtime_error("experiment exited " + std::to_string(code) + ": " + err.str());
    }
    for (const std::string ext : {".csv", ".json"}) {
      const bool eq = slurp(dir / "a" / (study + ext)) == slurp(dir / "b" / (study + ext)) &&
                      !slurp(dir / "a" / (study + ext)).empty();
      if (!eq) note(study + ext + " differs between reruns");
      same = same && eq;
    }
  }
  fs::remove_all(dir);
  detail = "sample, capacity and noise studies rerun with seed 7";
  return same;
}

}  // namespace

int main() {
  timed("coverage", coverage_audit_criterion);
  timed("quantile-rule", quantile_rule_criterion);
  timed("epipolar", epipolar_criterion);
  timed("flow", flow_criterion);
  timed("gradient-check", gradient_criterion);

  StudyRunner runner{ExperimentConfig{}};
  const auto seeds = runner.seeds();
  const ExperimentConfig& base = runner.config();

  timed("multimodality", [&](std::string& detail) {
    const Evaluation e = runner.evaluate(base.seed, base.classes, base.capacity, 1.0, 0.0);
    detail = fmt("%.1f%% of test frames multimodal in position, cuboid counts ", 100.0 * e.multimodal_fraction) +
             (e.cuboid_counts_consistent ? "consistent" : "INCONSISTENT");
    return e.multimodal_fraction >= 0.05 && e.cuboid_counts_consistent;
  });

  timed("k-contraction", [&](std::string& detail) {
    int wins = 0;
    for (std::uint64_t s : seeds) {
      const Evaluation e50 = runner.evaluate(s, 50, base.capacity, 1.0, 0.0);
      const Evaluation e10 = runner.evaluate(s, 10, base.capacity, 1.0, 0.0);
      const double w50 = e50.mean_interval_width, w10 = e10.mean_interval_width;
      note(fmt("seed %.0f: interval width K=50 %.4f, K=10 %.4f", static_cast<double>(s), w50, w10) +
           fmt(" (covered measure %.4f vs %.4f)", e50.mean_region_width, e10.mean_region_width));
      wins += w50 < w10 ? 1 : 0;
    }
    detail = std::to_string(wins) + "/" + std::to_string(seeds.size()) + " seeds narrower at K=50";
    return 2 * wins > static_cast<int>(seeds.size());
  });

  std::vector<ResultTable> tables;
  const auto t0 = std::chrono::steady_clock::now();
  tables.push_back(runner.sample_efficiency());
  tables.push_back(runner.parametric_efficiency());
  tables.push_back(runner.noise_robustness());
  const double study_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  note(fmt("three studies over %.0f seeds took %.0fs", static_cast<double>(seeds.size()), study_seconds));

  timed("reasoning-improvement", [&](std::string& detail) {
    bool all = true;
    int conditions = 0, held = 0;
    for (const ResultTable& t : tables) {
      for (const std::string& c : t.conditions()) {
        int wins = 0;
        std::vector<double> ratios;
        for (const ResultRow& r : t.rows_for(c)) {
          wins += r.conformal_rmse < r.classical_rmse ? 1 : 0;
          ratios.push_back(r.improvement);
        }
        const double med = median(ratios);
        const bool ok = wins >= 8 && med >= 1.5;
        note(t.study() + " " + c + fmt(": conformal better in %.0f/10, median ratio %.3f", wins, med) +
             (ok ? "" : "  <-- fails"));
        ++conditions;
        held += ok ? 1 : 0;
        all = all && ok;
      }
    }
    detail = std::to_string(held) + "/" + std::to_string(conditions) + " conditions with >= 8/10 wins and median >= 1.5";
    return all;
  });

  timed("adaptivity", [&](std::string& detail) {
    int sigma_ok = 0, fraction_ok = 0;
    for (std::uint64_t s : seeds) {
      bool inc = true;
      for (std::size_t i = 1; i < std::size(kStudySigmas); ++i)
        inc = inc && row_of(tables[2], sigma_label(kStudySigmas[i]), s).mean_set_size >=
                         row_of(tables[2], sigma_label(kStudySigmas[i - 1]), s).mean_set_size;
      bool dec = true;
      for (std::size_t i = 1; i < std::size(kStudyFractions); ++i)
        dec = dec && row_of(tables[0], fraction_label(kStudyFractions[i]), s).mean_set_size <=
                         row_of(tables[0], fraction_label(kStudyFractions[i - 1]), s).mean_set_size;
      sigma_ok += inc ? 1 : 0;
      fraction_ok += dec ? 1 : 0;
    }
    detail = "set size non-decreasing in sigma " + std::to_string(sigma_ok) + "/10, non-increasing in fraction " +
             std::to_string(fraction_ok) + "/10";
    return sigma_ok >= 8 && fraction_ok >= 8;
  });

  timed("capacity-consistency", [&](std::string& detail) {
    int ok = 0;
    for (std::uint64_t s : seeds) {
      double clo = 1e300, chi = 0, klo = 1e300, khi = 0;
      for (CapacityTier tier : kStudyTiers) {
        const ResultRow& r = row_of(tables[1], to_string(tier), s);
        clo = std::min(clo, r.conformal_rmse);
        chi = std::max(chi, r.conformal_rmse);
        klo = std::min(klo, r.classical_rmse);
        khi = std::max(khi, r.classical_rmse);
      }
      const bool pass = chi / clo <= 1.5 && khi / klo > chi / clo;
      note(fmt("seed %.0f: conformal spread %.3f, classical spread %.3f", static_cast<double>(s), chi / clo, khi / klo));
      ok += pass ? 1 : 0;
    }
    detail = std::to_string(ok) + "/10 seeds with conformal spread <= 1.5 below the classical spread";
    return 2 * ok > static_cast<int>(seeds.size());
  });

  timed("determinism", determinism_criterion);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
