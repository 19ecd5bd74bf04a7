// Acceptance run: one PASS/FAIL line per criterion. Tolerances live in the
// Full presets of the parameter structs and are restated below where a
// criterion pins them.
//
//   acceptance            run all ten criteria
//   acceptance 3 7        run a subset

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "interlace/checks.hpp"
#include "interlace/parallel.hpp"

using namespace interlace;

namespace {

struct Criterion {
  int number;
  std::string name;
  std::function<std::vector<CheckReport>(const CheckContext&)> run;
};

// Guards against a preset drifting away from the pinned acceptance values.
void require(bool ok, const char* what) {
  if (!ok) {
    std::fprintf(stderr, "acceptance preset mismatch: %s\n", what);
    std::exit(2);
  }
}

std::vector<Criterion> criteria() {
  const auto F = CheckScale::Full;
  std::vector<Criterion> c;
  c.push_back({1, "capacity cross-oracle", [F](const CheckContext& ctx) {
                 auto p = capacity_cross_params(F);
                 require(p.sets == 20 && p.max_size == 20, "capacity sets");
                 return check_capacity_cross(p, ctx);
               }});
  c.push_back({2, "scaling exponents", [F](const CheckContext& ctx) {
                 auto p = scaling_params(F);
                 require(p.cap_tol == 0.25 && p.green_tol == 0.15 && p.time_tol == 0.3, "scaling tolerances");
                 require(p.ball_radii.front() == 2 && p.ball_radii.back() == 12, "ball radii");
                 require(p.green_distances.front() == 4 && p.green_distances.back() == 32, "green distances");
                 return check_scaling(p, ctx);
               }});
  c.push_back({3, "sampler law", [F](const CheckContext& ctx) {
                 auto p = sampler_law_params(F);
                 require(p.replicas >= 10000 && p.alpha == 0.01, "sampler replicas");
                 return check_sampler_law(p, ctx);
               }});
  c.push_back({4, "process algebra", [F](const CheckContext& ctx) {
                 auto p = process_algebra_params(F);
                 require(p.alpha == 0.01, "KS level");
                 return check_process_algebra(p, ctx);
               }});
  c.push_back({5, "trace-set capacity regimes", [F](const CheckContext& ctx) {
                 auto p = trace_capacity_params(F);
                 require(p.sparse_tol == 0.3 && p.saturated_tol == 0.4, "trace tolerances");
                 return check_trace_capacity(p, ctx);
               }});
  c.push_back({6, "layer capacities", [F](const CheckContext& ctx) {
                 auto p = layer_capacity_params(F);
                 require(p.tol == 0.4, "layer tolerance");
                 return check_layer_capacity(p, ctx);
               }});
  c.push_back({7, "hitting lemma", [F](const CheckContext& ctx) {
                 auto p = hitting_params(F);
                 require(p.floor == 0.02 && p.radii == std::vector<std::int64_t>{16, 32, 64}, "hitting floor/radii");
                 return check_hitting_lemma(p, ctx);
               }});
  c.push_back({8, "convolution lemma", [F](const CheckContext& ctx) {
                 auto p = convolution_params(F);
                 require(p.tol == 0.3, "convolution tolerance");
                 return check_convolution_suite(p, ctx);
               }});
  c.push_back({9, "pair-connection decay", [F](const CheckContext& ctx) {
                 auto p = pair_decay_params(F);
                 require(p.separations == std::vector<std::int64_t>{8, 16, 32, 64}, "pair separations");
                 auto r = check_pair_decay(p, ctx);
                 auto m = check_mu_S_bound(mu_S_params(F), ctx);
                 r.insert(r.end(), m.begin(), m.end());
                 return r;
               }});
  c.push_back({10, "inequalities and graph", [F](const CheckContext& ctx) {
                 auto p = inequality_params(F);
                 require(p.slack == 5.0, "inequality slack");
                 auto g = graph_check_params(F);
                 require(g.instances == 50, "graph instances");
                 auto r = check_inequalities(p, ctx);
                 auto q = check_graph(g, ctx);
                 r.insert(r.end(), q.begin(), q.end());
                 return r;
               }});
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  CheckContext ctx;
  ctx.jobs = default_jobs();
  if (const char* s = std::getenv("INTERLACE_SEED")) ctx.seed = std::strtoull(s, nullptr, 10);

  std::vector<std::string> summary;
  bool ok = true;
  for (const auto& c : criteria()) {
    if (!only.empty() && !only.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<CheckReport> reports;
    std::string error;
    try {
      reports = c.run(ctx);
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_reports_text(std::cout, reports);
    const bool pass = error.empty() && !reports.empty() && all_pass(reports);
    ok = ok && pass;
    char line[256];
    std::snprintf(line, sizeof line, "%s criterion %d (%s) reports=%zu time=%.0fs%s%s", pass ? "PASS" : "FAIL",
                  c.number, c.name.c_str(), reports.size(), secs, error.empty() ? "" : " error: ", error.c_str());
    std::cout << line << "\n" << std::flush;
    summary.push_back(line);
  }
  std::cout << "\n== acceptance summary (seed " << ctx.seed << ") ==\n";
  for (const auto& s : summary) std::cout << s << "\n";
  return ok ? 0 : 1;
}
