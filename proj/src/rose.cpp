#include "rose/rose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "rose/hashing.hpp"
#include "rose/parallel.hpp"

namespace rose {

namespace {

struct JobOutput {
  std::vector<double> peer_f1;   // aligned with the job's peer list
  std::vector<double> extra_f1;  // aligned with extra_eval
};

std::unique_ptr<TextClassifier> make_classifier(const ClassifierFactory& factory) {
  if (factory) return factory();
  return std::make_unique<HashedLogisticClassifier>();
}

const TrainTest& lookup(const DatasetMap& all, const std::string& id) {
  auto it = all.find(id);
  if (it == all.end()) throw Error("rose: no datasets for candidate '" + id + "'");
  return it->second;
}

JobOutput run_job(const std::string& candidate, std::size_t run,
                  std::span<const std::string> peers, const DatasetMap& all,
                  const RoseConfig& config, std::span<const NamedDataset> extra_eval,
                  const ClassifierFactory& factory) {
  const TrainTest& own = lookup(all, candidate);
  TrainConfig tc = config.train_config;
  tc.rng_seed = run_seed(config.master_seed, own.train, run);
  auto clf = make_classifier(factory);
  clf->fit(own.train, tc);
  JobOutput out;
  out.peer_f1.reserve(peers.size());
  for (const auto& p : peers) out.peer_f1.push_back(clf->evaluate(lookup(all, p).test));
  for (const auto& e : extra_eval) out.extra_f1.push_back(clf->evaluate(*e.dataset));
  return out;
}

std::vector<std::string> sorted_unique(std::span<const std::string> ids) {
  std::vector<std::string> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw Error("rose: duplicate candidate id");
  }
  return out;
}

void check_config(const RoseConfig& config, std::size_t n_candidates) {
  if (config.n_runs == 0) throw Error("rose: n_runs must be >= 1");
  if (n_candidates < 2) throw Error("rose: needs at least 2 candidates");
  if (config.cross_subset_size &&
      (*config.cross_subset_size < 1 || *config.cross_subset_size > n_candidates - 1)) {
    throw Error("rose: cross_subset_size " + std::to_string(*config.cross_subset_size) +
                " outside 1.." + std::to_string(n_candidates - 1));
  }
}

// Aggregates job outputs of one candidate into its score. Sums run in peer
// order, then run order.
RoseScore fold(const std::string& candidate, const std::vector<std::vector<std::string>>& peers,
               const std::vector<JobOutput>& jobs, std::span<const NamedDataset> extra_eval) {
  RoseScore s;
  s.generator_id = candidate;
  const std::size_t n_runs = jobs.size();
  double total = 0.0;
  for (std::size_t r = 0; r < n_runs; ++r) {
    double sum = 0.0;
    for (std::size_t p = 0; p < peers[r].size(); ++p) {
      const double f1 = jobs[r].peer_f1[p];
      s.cells.push_back({candidate, peers[r][p], r, f1});
      sum += f1;
    }
    const double mean = sum / static_cast<double>(peers[r].size());
    s.per_run_means.push_back(mean);
    total += mean;
  }
  s.score = total / static_cast<double>(n_runs);
  for (std::size_t e = 0; e < extra_eval.size(); ++e) {
    auto& v = s.extra_per_run[extra_eval[e].name];
    for (const auto& j : jobs) v.push_back(j.extra_f1[e]);
  }
  return s;
}

}  // namespace

std::uint64_t run_seed(std::uint64_t master_seed, const Dataset& train_data, std::size_t run) {
  return SeedBuilder(master_seed).add("run").add(fingerprint(train_data)).add(run).seed();
}

std::vector<std::string> evaluated_peers(const std::string& candidate,
                                         std::span<const std::string> all_ids,
                                         const RoseConfig& config, std::size_t run) {
  std::vector<std::string> peers;
  for (const auto& id : all_ids) {
    if (id != candidate) peers.push_back(id);
  }
  std::sort(peers.begin(), peers.end());
  if (!config.cross_subset_size || *config.cross_subset_size >= peers.size()) return peers;
  const std::size_t k = *config.cross_subset_size;
  Rng rng(SeedBuilder(config.master_seed).add("peers").add(candidate).add(run).add(k).seed());
  std::vector<std::string> chosen;
  for (std::size_t i : rng.sample_indices(peers.size(), k)) chosen.push_back(peers[i]);
  return chosen;
}

RoseScore rose_score(const std::string& candidate, const DatasetMap& all_datasets,
                     const RoseConfig& config, std::span<const NamedDataset> extra_eval,
                     const ClassifierFactory& factory) {
  std::vector<std::string> ids;
  for (const auto& [id, data] : all_datasets) ids.push_back(id);
  check_config(config, ids.size());
  if (!all_datasets.contains(candidate)) {
    throw Error("rose: candidate '" + candidate + "' has no datasets");
  }
  std::vector<std::vector<std::string>> peers(config.n_runs);
  for (std::size_t r = 0; r < config.n_runs; ++r) {
    peers[r] = evaluated_peers(candidate, ids, config, r);
  }
  std::vector<JobOutput> jobs(config.n_runs);
  parallel_for(config.n_runs, config.workers, [&](std::size_t r) {
    jobs[r] = run_job(candidate, r, peers[r], all_datasets, config, extra_eval, factory);
  });
  return fold(candidate, peers, jobs, extra_eval);
}

std::string select_best(std::span<const RoseScore> scores) {
  if (scores.empty()) throw Error("rose: no scores to select from");
  const RoseScore* best = &scores[0];
  for (const auto& s : scores) {
    if (s.score > best->score || (s.score == best->score && s.generator_id < best->generator_id)) {
      best = &s;
    }
  }
  return best->generator_id;
}

std::vector<std::string> per_run_selection(std::span<const RoseScore> scores) {
  if (scores.empty()) return {};
  const std::size_t n_runs = scores[0].per_run_means.size();
  std::vector<std::string> out;
  for (std::size_t r = 0; r < n_runs; ++r) {
    const RoseScore* best = &scores[0];
    for (const auto& s : scores) {
      const double v = s.per_run_means.at(r);
      const double b = best->per_run_means.at(r);
      if (v > b || (v == b && s.generator_id < best->generator_id)) best = &s;
    }
    out.push_back(best->generator_id);
  }
  return out;
}

RoseResult rose_all(std::span<const std::string> candidates, const DatasetMap& all_datasets,
                    const RoseConfig& config, std::span<const NamedDataset> extra_eval,
                    const ClassifierFactory& factory) {
  const auto ids = sorted_unique(candidates);
  check_config(config, ids.size());
  for (const auto& id : ids) lookup(all_datasets, id);

  const std::size_t n_runs = config.n_runs;
  std::vector<std::vector<std::vector<std::string>>> peers(ids.size());
  for (std::size_t c = 0; c < ids.size(); ++c) {
    for (std::size_t r = 0; r < n_runs; ++r) {
      peers[c].push_back(evaluated_peers(ids[c], ids, config, r));
    }
  }
  std::vector<JobOutput> jobs(ids.size() * n_runs);
  parallel_for(jobs.size(), config.workers, [&](std::size_t j) {
    const std::size_t c = j / n_runs, r = j % n_runs;
    jobs[j] = run_job(ids[c], r, peers[c][r], all_datasets, config, extra_eval, factory);
  });

  RoseResult result;
  for (std::size_t c = 0; c < ids.size(); ++c) {
    std::vector<JobOutput> mine(jobs.begin() + static_cast<std::ptrdiff_t>(c * n_runs),
                                jobs.begin() + static_cast<std::ptrdiff_t>((c + 1) * n_runs));
    result.scores.push_back(fold(ids[c], peers[c], mine, extra_eval));
  }
  result.selected = select_best(result.scores);
  return result;
}

std::size_t CrossEvaluation::index_of(const std::string& id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) throw Error("rose: unknown candidate '" + id + "'");
  return static_cast<std::size_t>(it - ids.begin());
}

CrossEvaluation cross_evaluate(std::span<const std::string> candidates,
                               const DatasetMap& all_datasets, const RoseConfig& config,
                               std::span<const NamedDataset> extra_eval,
                               const ClassifierFactory& factory) {
  CrossEvaluation cross;
  cross.ids = sorted_unique(candidates);
  cross.n_runs = config.n_runs;
  if (config.n_runs == 0) throw Error("rose: n_runs must be >= 1");
  const std::size_t n = cross.ids.size();
  for (const auto& id : cross.ids) lookup(all_datasets, id);

  std::vector<std::vector<std::string>> peers(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (const auto& id : cross.ids) {
      if (id != cross.ids[c]) peers[c].push_back(id);
    }
  }
  std::vector<JobOutput> jobs(n * config.n_runs);
  parallel_for(jobs.size(), config.workers, [&](std::size_t j) {
    const std::size_t c = j / config.n_runs, r = j % config.n_runs;
    jobs[j] = run_job(cross.ids[c], r, peers[c], all_datasets, config, extra_eval, factory);
  });

  cross.f1.assign(n * config.n_runs * n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const std::size_t c = j / config.n_runs;
    for (std::size_t p = 0; p < peers[c].size(); ++p) {
      cross.f1[j * n + cross.index_of(peers[c][p])] = jobs[j].peer_f1[p];
    }
    for (std::size_t e = 0; e < extra_eval.size(); ++e) {
      auto& v = cross.extra[extra_eval[e].name];
      v.resize(jobs.size());
      v[j] = jobs[j].extra_f1[e];
    }
  }
  return cross;
}

RoseResult rose_from_cross(const CrossEvaluation& cross, std::span<const std::string> subset,
                           const RoseConfig& config) {
  const auto ids = sorted_unique(subset);
  check_config(config, ids.size());
  if (config.n_runs != cross.n_runs) throw Error("rose: n_runs differs from cross evaluation");

  RoseResult result;
  for (const auto& id : ids) {
    const std::size_t c = cross.index_of(id);
    std::vector<std::vector<std::string>> peers;
    std::vector<JobOutput> jobs(cross.n_runs);
    std::vector<NamedDataset> extra_names;
    for (const auto& [name, values] : cross.extra) extra_names.push_back({name, nullptr});
    for (std::size_t r = 0; r < cross.n_runs; ++r) {
      peers.push_back(evaluated_peers(id, ids, config, r));
      for (const auto& p : peers.back()) jobs[r].peer_f1.push_back(cross.at(c, r, cross.index_of(p)));
      for (const auto& [name, values] : cross.extra) {
        jobs[r].extra_f1.push_back(values[c * cross.n_runs + r]);
      }
    }
    result.scores.push_back(fold(id, peers, jobs, extra_names));
  }
  result.selected = select_best(result.scores);
  return result;
}

std::map<std::size_t, RoseResult> rose_subset_sweep(std::span<const std::string> candidates,
                                                    const DatasetMap& all_datasets,
                                                    const RoseConfig& config,
                                                    std::span<const std::size_t> k_values) {
  const std::size_t n = candidates.size();
  for (std::size_t k : k_values) {
    if (k < 1 || k + 1 > n) {
      throw Error("rose: invalid k " + std::to_string(k) + " for " + std::to_string(n) +
                  " candidates");
    }
  }
  // Models are identical across k (their seeds do not involve k), so train once.
  const CrossEvaluation cross = cross_evaluate(candidates, all_datasets, config);
  std::map<std::size_t, RoseResult> out;
  for (std::size_t k : k_values) {
    RoseConfig ck = config;
    ck.cross_subset_size = k;
    out[k] = rose_from_cross(cross, candidates, ck);
  }
  return out;
}

}  // namespace rose
