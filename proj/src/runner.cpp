// SPDX-License-Identifier: Apache-2.0
#include "fedmas/runner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fedmas/errors.hpp"
#include "fedmas/rng.hpp"

namespace fedmas {

namespace {

using nlohmann::json;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json config_json(const ExperimentConfig& cfg) {
    json j;
    for (const auto& [k, v] : config_to_key_values(cfg)) j[k] = v;
    return j;
}

json metrics_json(const MetricsReport& m) {
    json j;
    j["overall_acc"] = m.overall_acc;
    j["balanced_acc"] = m.balanced_acc;
    j["per_class_acc"] = m.per_class_acc;
    j["per_class_defined"] = m.per_class_defined;
    j["excluded_classes"] = m.excluded_classes;
    j["head_acc"] = m.head_acc ? json(*m.head_acc) : json(nullptr);
    j["medium_acc"] = m.medium_acc ? json(*m.medium_acc) : json(nullptr);
    j["tail_acc"] = m.tail_acc ? json(*m.tail_acc) : json(nullptr);
    j["all_avg"] = m.all_avg;
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << contents;
    if (!out) throw io_error("failed writing " + path.string());
}

std::string opt_field(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
    Dataset full = gen_longtail(cfg.num_classes, cfg.n_max, cfg.imbalance_ratio, cfg.feature_dim,
                                derive_seed(cfg.seed, seed_tag::data_gen));
    TrainTestSplit split =
        split_train_test(full, 0.2, derive_seed(cfg.seed, seed_tag::train_test_split));
    Partition partition =
        cfg.iid ? iid_partition(split.train, cfg.num_clients,
                                derive_seed(cfg.seed, seed_tag::partition))
                : dirichlet_partition(split.train, cfg.num_clients, cfg.dirichlet_alpha,
                                      derive_seed(cfg.seed, seed_tag::partition));
    PriorEmbedder prior(cfg.feature_dim, cfg.embed_dim, derive_seed(cfg.seed, seed_tag::prior));

    // Auto thresholds scale the class-count cutoffs with the dataset size.
    const std::size_t hi = cfg.shot_hi != 0 ? cfg.shot_hi : std::max<std::size_t>(full.size() / 20, 2);
    const std::size_t lo = cfg.shot_lo != 0 ? cfg.shot_lo : std::max<std::size_t>(full.size() / 200, 1);
    ShotGroups groups = shot_groups(full.class_counts, hi, lo);

    return PreparedExperiment{std::move(full),  std::move(split.train), std::move(split.test),
                              std::move(partition), std::move(prior),   std::move(groups)};
}

void write_rounds_csv(const std::filesystem::path& path, const FederationResult& fed,
                      std::size_t num_clients) {
    std::ostringstream out;
    out << "round,lr,balanced_acc,overall_acc,head_acc,medium_acc,tail_acc,all_avg";
    for (std::size_t c = 0; c < num_clients; ++c) out << ",rf_" << c;
    for (std::size_t c = 0; c < num_clients; ++c) out << ",weight_" << c;
    out << "\n";
    for (const RoundReport& r : fed.history) {
        if (!r.metrics) continue;
        const MetricsReport& m = *r.metrics;
        out << r.round << ',' << format_double(r.lr) << ',' << format_double(m.balanced_acc) << ','
            << format_double(m.overall_acc) << ',' << opt_field(m.head_acc) << ','
            << opt_field(m.medium_acc) << ',' << opt_field(m.tail_acc) << ','
            << format_double(m.all_avg);
        for (std::size_t c = 0; c < num_clients; ++c) out << ',' << format_double(r.rf[c]);
        for (std::size_t c = 0; c < num_clients; ++c) out << ',' << format_double(r.weights[c]);
        out << "\n";
    }
    write_text_file(path, out.str());
}

void write_diagnostics_csv(const std::filesystem::path& path, const FederationResult& fed) {
    std::ostringstream out;
    out << "table,round,client,class,value\n";
    if (!fed.history.empty()) {
        const RoundReport& first = fed.history.front();
        for (std::size_t c = 0; c < first.client_diags.size(); ++c) {
            const ClasswiseLoss& w = first.client_diags[c].w;
            for (std::size_t k = 0; k < w.num_classes(); ++k) {
                if (!w.has(k)) continue;
                out << "w_round0," << first.round << ',' << c << ',' << k << ','
                    << format_double(w.per_class[k]) << "\n";
            }
        }
    }
    for (const RoundReport& r : fed.history) {
        for (std::size_t c = 0; c < r.rf.size(); ++c) {
            out << "rf," << r.round << ',' << c << ",," << format_double(r.rf[c]) << "\n";
        }
        for (std::size_t c = 0; c < r.weights.size(); ++c) {
            out << "weight," << r.round << ',' << c << ",," << format_double(r.weights[c]) << "\n";
        }
        for (std::size_t c = 0; c < r.contribution_share.size(); ++c) {
            out << "cum_share," << r.round << ',' << c << ",,"
                << format_double(r.contribution_share[c]) << "\n";
        }
    }
    if (!fed.history.empty()) {
        const std::size_t num_clients = fed.history.front().rf.size();
        for (std::size_t c = 0; c < num_clients; ++c) {
            std::vector<double> series;
            series.reserve(fed.history.size());
            for (const RoundReport& r : fed.history) series.push_back(r.rf[c]);
            const auto slope = least_squares_slope(series);
            out << "rf_slope,," << c << ",," << (slope ? format_double(*slope) : std::string())
                << "\n";
        }
    }
    write_text_file(path, out.str());
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    const std::string started = iso_timestamp();
    const PreparedExperiment prep = prepare_experiment(cfg);
    const FederationInputs inputs{prep.train, prep.test, prep.partition, prep.prior, prep.groups};
    FederationResult fed = run_federation(cfg, inputs);

    if (fed.history.empty() || !fed.history.back().metrics) {
        throw error("run produced no evaluated rounds");
    }
    const MetricsReport final_metrics = *fed.history.back().metrics;

    const std::filesystem::path out_dir(cfg.output_dir);
    std::filesystem::create_directories(out_dir);

    json manifest;
    manifest["version"] = kVersion;
    manifest["config"] = config_json(cfg);
    json stage_seeds;
    stage_seeds["data_gen"] = derive_seed(cfg.seed, seed_tag::data_gen);
    stage_seeds["train_test_split"] = derive_seed(cfg.seed, seed_tag::train_test_split);
    stage_seeds["partition"] = derive_seed(cfg.seed, seed_tag::partition);
    stage_seeds["prior"] = derive_seed(cfg.seed, seed_tag::prior);
    stage_seeds["model_init"] = derive_seed(cfg.seed, seed_tag::model_init);
    manifest["stage_seeds"] = stage_seeds;
    manifest["started_at"] = started;
    manifest["finished_at"] = iso_timestamp();
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

    write_rounds_csv(out_dir / "rounds.csv", fed, cfg.num_clients);
    write_diagnostics_csv(out_dir / "diagnostics.csv", fed);

    json fm;
    fm["final_round"] = fed.history.back().round;
    fm["metrics"] = metrics_json(final_metrics);
    write_text_file(out_dir / "final_metrics.json", fm.dump(2) + "\n");

    return RunResult{out_dir, final_metrics, std::move(fed)};
}

SweepSpec parse_grid(const std::string& spec) {
    SweepSpec grid;
    if (spec.empty()) return grid;
    std::stringstream dims(spec);
    std::string dim;
    while (std::getline(dims, dim, ';')) {
        if (dim.empty()) continue;
        const auto eq = dim.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw config_error("grid: expected key=v1,v2,... in '" + dim + "'");
        }
        const std::string key = dim.substr(0, eq);
        std::vector<std::string> values;
        std::stringstream vals(dim.substr(eq + 1));
        std::string v;
        while (std::getline(vals, v, ',')) {
            if (!v.empty()) values.push_back(v);
        }
        if (values.empty()) {
            throw config_error("grid: dimension '" + key + "' has no values");
        }
        for (const auto& [existing, _] : grid.dims) {
            if (existing == key) throw config_error("grid: duplicate dimension '" + key + "'");
        }
        grid.dims.emplace_back(key, std::move(values));
    }
    return grid;
}

namespace {

std::string sanitize_for_path(const std::string& s) {
    std::string out = s;
    for (char& ch : out) {
        const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.' ||
                        ch == '=' || ch == '-' || ch == '+';
        if (!ok) ch = '_';
    }
    return out;
}

struct Aggregate {
    std::vector<double> balanced, overall, head, medium, tail, all_avg;
};

void append_metrics(Aggregate& agg, const MetricsReport& m) {
    agg.balanced.push_back(m.balanced_acc);
    agg.overall.push_back(m.overall_acc);
    if (m.head_acc) agg.head.push_back(*m.head_acc);
    if (m.medium_acc) agg.medium.push_back(*m.medium_acc);
    if (m.tail_acc) agg.tail.push_back(*m.tail_acc);
    agg.all_avg.push_back(m.all_avg);
}

std::pair<std::string, std::string> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {"", ""};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= double(xs.size());
    double var = 0.0;
    if (xs.size() > 1) {
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= double(xs.size() - 1);
    }
    return {format_double(mean), format_double(std::sqrt(var))};
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& grid) {
    std::vector<KeyValues> cells;
    if (grid.empty()) {
        cells.push_back({});
    } else {
        cells.push_back({});
        for (const auto& [key, values] : grid.dims) {
            std::vector<KeyValues> next;
            next.reserve(cells.size() * values.size());
            for (const KeyValues& cell : cells) {
                for (const std::string& v : values) {
                    KeyValues kv = cell;
                    kv[key] = v;
                    next.push_back(std::move(kv));
                }
            }
            cells = std::move(next);
        }
    }
    const bool grid_has_seed =
        std::any_of(grid.dims.begin(), grid.dims.end(),
                    [](const auto& d) { return d.first == "seed"; });

    const std::filesystem::path sweep_dir(base.output_dir);
    std::filesystem::create_directories(sweep_dir);

    // group key (non-seed overrides) -> aggregated finals
    std::map<std::string, Aggregate> groups;
    std::vector<std::string> group_order;

    for (std::size_t i = 0; i < cells.size(); ++i) {
        ExperimentConfig cfg = base;
        std::vector<std::string> errors;
        apply_key_values(cfg, cells[i], errors);
        if (!grid_has_seed) {
            cfg.seed = base.seed ^ std::uint64_t(i);
        }

        std::string slug;
        std::string group_key;
        for (const auto& [k, v] : cells[i]) {
            slug += (slug.empty() ? "" : ",") + k + "=" + v;
            if (k != "seed") group_key += (group_key.empty() ? "" : ",") + k + "=" + v;
        }
        if (group_key.empty()) group_key = "default";

        char cell_name[64];
        std::snprintf(cell_name, sizeof(cell_name), "cell_%03zu", i);
        std::string dir_name = cell_name;
        if (!slug.empty()) dir_name += "_" + sanitize_for_path(slug);
        cfg.output_dir = (sweep_dir / dir_name).string();

        validate(cfg, errors);
        if (!errors.empty()) {
            std::ostringstream msg;
            msg << "sweep cell " << i << " is invalid:";
            for (const std::string& e : errors) msg << "\n  - " << e;
            throw config_error(msg.str());
        }

        const RunResult r = run_experiment(cfg);
        if (groups.find(group_key) == groups.end()) group_order.push_back(group_key);
        append_metrics(groups[group_key], r.final_metrics);
    }

    std::ostringstream out;
    out << "group,replicates,balanced_acc_mean,balanced_acc_std,overall_acc_mean,overall_acc_std,"
           "head_acc_mean,head_acc_std,medium_acc_mean,medium_acc_std,tail_acc_mean,tail_acc_std,"
           "all_avg_mean,all_avg_std\n";
    for (const std::string& key : group_order) {
        const Aggregate& agg = groups.at(key);
        const auto [bm, bs] = mean_std(agg.balanced);
        const auto [om, os] = mean_std(agg.overall);
        const auto [hm, hs] = mean_std(agg.head);
        const auto [mm, ms] = mean_std(agg.medium);
        const auto [tm, ts] = mean_std(agg.tail);
        const auto [am, as] = mean_std(agg.all_avg);
        out << '"' << key << '"' << ',' << agg.balanced.size() << ',' << bm << ',' << bs << ','
            << om << ',' << os << ',' << hm << ',' << hs << ',' << mm << ',' << ms << ',' << tm
            << ',' << ts << ',' << am << ',' << as << "\n";
    }
    const std::filesystem::path summary = sweep_dir / "summary.csv";
    write_text_file(summary, out.str());
    return SweepResult{summary, cells.size()};
}

}  // namespace fedmas
