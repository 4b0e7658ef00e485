#include "fairhead/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "fairhead/random.hpp"
#include "io_util.hpp"

namespace fairhead {

namespace fs = std::filesystem;
using nlohmann::json;

ReportFormat parse_report_format(const std::string& name) {
    if (name == "csv") return ReportFormat::csv;
    if (name == "json") return ReportFormat::json;
    throw Error("unknown report format '" + name + "' (expected csv or json)");
}

ExperimentConfig ExperimentConfig::desk_defaults() {
    ExperimentConfig c;
    SynthConfig synth;
    synth.group_bias = 0.8;
    c.data = synth;

    c.pretrain = TrainConfig::paper_pretrain();
    c.pretrain.learning_rate = 1e-3;

    c.finetune = TrainConfig::paper_finetune(Method::fair_cb);
    c.finetune.learning_rate = 1e-2;
    c.finetune.epochs = 5;
    c.finetune.alpha = 30.0;
    c.finetune.units_per_group = 100;
    return c;
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw Error("experiment: trials must be >= 1");
    if (methods.empty()) throw Error("experiment: methods list is empty");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error("experiment: test_fraction must lie in (0, 1)");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("experiment: threshold must lie in [0, 1]");
    if (finetune.units_per_group < 1) throw Error("experiment: units_per_group must be >= 1");
    pretrain.validate();
    finetune.validate();
    if (std::holds_alternative<fs::path>(data) && !cohort)
        throw Error("experiment: a cohort spec is required for dataset directories");
}

namespace {

void read_train_config(const json& j, TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.alpha = j.value("alpha", c.alpha);
    c.units_per_group = j.value("units_per_group", c.units_per_group);
    if (j.contains("sample_budget") && !j["sample_budget"].is_null())
        c.sample_budget = j["sample_budget"].get<std::size_t>();
}

SynthConfig read_synth(const json& j, SynthConfig s) {
    s.n = j.value("n", s.n);
    s.d = j.value("d", s.d);
    s.c = j.value("c", s.c);
    s.attribute_count = j.value("attrs", s.attribute_count);
    s.group_bias = j.value("beta", s.group_bias);
    s.overlap = j.value("overlap", s.overlap);
    s.signal_scale = j.value("signal_scale", s.signal_scale);
    s.noise_scale = j.value("noise_scale", s.noise_scale);
    s.group_signal = j.value("group_signal", s.group_signal);
    s.seed = j.value("seed", s.seed);
    if (j.contains("prevalence")) {
        const auto& p = j["prevalence"];
        s.prevalence = p.is_array() ? p.get<std::vector<double>>() : std::vector<double>{p.get<double>()};
    }
    if (j.contains("group_weights")) s.group_weights = j["group_weights"].get<std::vector<double>>();
    return s;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text, const fs::path& base_dir) {
    ExperimentConfig c = ExperimentConfig::desk_defaults();
    try {
        const auto j = json::parse(json_text);
        if (j.contains("data")) {
            const auto& d = j["data"];
            if (d.contains("path")) c.data = resolve(base_dir, d["path"].get<std::string>());
            else if (d.contains("synth")) c.data = read_synth(d["synth"], std::get<SynthConfig>(c.data));
            else throw Error("experiment config: 'data' needs 'path' or 'synth'");
        }
        if (j.contains("cohort_spec")) {
            const auto& s = j["cohort_spec"];
            c.cohort = s.is_string() ? load_cohort_spec(resolve(base_dir, s.get<std::string>())) : parse_cohort_spec(s.dump());
        }
        c.test_fraction = j.value("test_fraction", c.test_fraction);
        if (j.contains("extractor"))
            c.extractor.layer_widths = j["extractor"].value("layer_widths", c.extractor.layer_widths);
        if (j.contains("pretrain")) read_train_config(j["pretrain"], c.pretrain);
        if (j.contains("finetune")) read_train_config(j["finetune"], c.finetune);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        c.trials = j.value("trials", c.trials);
        c.base_seed = j.value("base_seed", c.base_seed);
        c.threshold = j.value("threshold", c.threshold);
        if (j.contains("output")) {
            const auto& o = j["output"];
            if (o.contains("path")) c.output = resolve(base_dir, o["path"].get<std::string>());
            if (o.contains("format")) c.format = parse_report_format(o["format"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw Error(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& file) {
    return parse_experiment_config(detail::read_file(file), file.parent_path());
}

const MethodSummary& ResultsTable::of(Method m) const {
    for (const auto& s : summary)
        if (s.method == m) return s;
    throw Error("results table has no row for " + method_label(m));
}

ResultsTable summarize(std::vector<TrialRecord> records, const std::vector<Method>& methods) {
    auto method_rank = [&](Method m) {
        return static_cast<std::size_t>(std::find(methods.begin(), methods.end(), m) - methods.begin());
    };
    std::sort(records.begin(), records.end(), [&](const TrialRecord& a, const TrialRecord& b) {
        if (method_rank(a.method) != method_rank(b.method)) return method_rank(a.method) < method_rank(b.method);
        return a.seed < b.seed;
    });

    ResultsTable table;
    for (auto m : methods) {
        std::vector<const TrialRecord*> rows;
        for (const auto& r : records)
            if (r.method == m) rows.push_back(&r);
        MethodSummary s{m, {}, {}, {}, {}};
        if (!rows.empty()) {
            const double count = static_cast<double>(rows.size());
            auto stat = [&](double TrialRecord::*field) {
                double sum = 0.0;
                for (const auto* r : rows) sum += r->*field;
                MeanStd out{sum / count, 0.0};
                if (rows.size() > 1) {
                    double sq = 0.0;
                    for (const auto* r : rows) sq += (r->*field - out.mean) * (r->*field - out.mean);
                    out.std = std::sqrt(sq / (count - 1.0));
                }
                return out;
            };
            s.auc = stat(&TrialRecord::auc_avg);
            s.eo_diff = stat(&TrialRecord::eo_diff_avg);
            s.wacc = stat(&TrialRecord::wacc_avg);
            s.af = stat(&TrialRecord::af_avg);
            s.af.mean = s.wacc.mean - s.eo_diff.mean;
        }
        table.summary.push_back(s);
    }
    table.trials = std::move(records);
    return table;
}

namespace {

struct Prepared {
    Dataset data;
    DatasetSplit split;
    GroupAssignment groups;
    ExtractorModel extractor;
    ClassWeights weights;
    MatrixD train_features;
    MatrixU8 train_labels;
    MatrixD test_features;
    MatrixU8 test_labels;
    GroupAssignment test_groups;
    std::vector<std::size_t> train_position;  // dataset row -> row of train_features
};

Prepared prepare(const ExperimentConfig& cfg) {
    Prepared p;
    CohortSpec spec;
    if (const auto* path = std::get_if<fs::path>(&cfg.data)) {
        p.data = load_dataset(*path);
        auto stored = load_dataset_split(*path, p.data);
        p.split = stored ? *stored : split_by_unit(p.data, cfg.test_fraction, derive_seed(cfg.base_seed, "split"));
        spec = *cfg.cohort;
    } else {
        const auto& synth = std::get<SynthConfig>(cfg.data);
        p.data = generate(synth);
        p.split = split_by_unit(p.data, cfg.test_fraction, derive_seed(cfg.base_seed, "split"));
        spec = cfg.cohort ? *cfg.cohort : default_cohort_spec(synth);
    }
    if (!p.data.reference_class()) throw Error("experiment: dataset has no reference class");
    if (p.split.train.empty() || p.split.test.empty()) throw Error("experiment: split leaves a side empty");

    p.groups = assign_groups(p.data, resolve_thresholds(spec, p.data, p.split.train));

    TrainConfig pre = cfg.pretrain;
    pre.method = Method::erm;
    pre.seed = cfg.base_seed;
    p.extractor = pretrain_extractor(p.data, p.split.train, cfg.extractor, pre);

    p.train_labels = gather_rows(p.data.labels(), p.split.train);
    p.weights = class_weights(p.train_labels, *p.data.reference_class());
    p.train_features = extract_features(p.extractor, gather_rows(p.data.features(), p.split.train));
    p.test_features = extract_features(p.extractor, gather_rows(p.data.features(), p.split.test));
    p.test_labels = gather_rows(p.data.labels(), p.split.test);
    p.test_groups = select_rows(p.groups, p.split.test);
    p.train_position.assign(p.data.n(), SIZE_MAX);
    for (std::size_t i = 0; i < p.split.train.size(); ++i) p.train_position[p.split.train[i]] = i;
    return p;
}

TrialRecord record_of(const EvaluationReport& r, Method m, std::size_t trial, std::uint64_t seed, std::size_t units) {
    return {m, trial, seed, r.auc_avg, r.eo_diff_avg, r.wacc_avg, r.af_avg, units};
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const Prepared& p, std::size_t trial,
                                   const std::optional<EvaluationReport>& erm) {
    const std::uint64_t seed = cfg.base_seed + trial;
    const std::size_t m = cfg.finetune.units_per_group;
    const std::size_t budget = cfg.finetune.sample_budget.value_or(p.groups.group_count * m);
    std::optional<std::vector<std::size_t>> balanced;
    std::vector<TrialRecord> out;

    for (auto method : cfg.methods) {
        if (method == Method::erm) {
            out.push_back(record_of(*erm, method, trial, seed, 0));
            continue;
        }
        std::vector<std::size_t> rows;
        if (method == Method::fine_tune) {
            rows = random_sample(p.data, budget, derive_seed(seed, "random-sample"), p.split.train);
        } else {
            // DFR and FAIR_CB share the trial's balanced draw.
            if (!balanced) balanced = balanced_sample(p.data, p.groups, m, derive_seed(seed, "balanced-sample"), p.split.train);
            rows = *balanced;
        }
        std::vector<std::size_t> positions(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) positions[i] = p.train_position[rows[i]];

        TrainConfig tc = cfg.finetune;
        tc.method = method;
        tc.seed = seed;
        const auto head = finetune_head(gather_rows(p.train_features, positions), gather_rows(p.train_labels, positions),
                                        select_rows(p.groups, rows), p.weights, tc);
        const auto report = evaluate(head, p.test_features, p.test_labels, p.test_groups, p.data.label_names(),
                                     cfg.threshold);
        out.push_back(record_of(report, method, trial, seed, units_of(p.data, rows).size()));
    }
    return out;
}

}  // namespace

ResultsTable run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
    cfg.validate();
    const Prepared p = prepare(cfg);

    std::optional<EvaluationReport> erm;
    if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::erm) != cfg.methods.end())
        erm = evaluate(p.extractor.head, p.test_features, p.test_labels, p.test_groups, p.data.label_names(),
                       cfg.threshold);

    std::vector<std::vector<TrialRecord>> per_trial(cfg.trials);
    std::vector<std::exception_ptr> failures(cfg.trials);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t = next++; t < cfg.trials; t = next++) {
            try {
                per_trial[t] = run_trial(cfg, p, t, erm);
            } catch (...) {
                failures[t] = std::current_exception();
            }
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, cfg.trials);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        if (!failures[t]) continue;
        try {
            std::rethrow_exception(failures[t]);
        } catch (const std::exception& e) {
            throw Error("trial " + std::to_string(t) + " (seed " + std::to_string(cfg.base_seed + t) +
                        ") failed: " + e.what());
        }
    }

    std::vector<TrialRecord> records;
    for (auto& rows : per_trial) records.insert(records.end(), rows.begin(), rows.end());
    return summarize(std::move(records), cfg.methods);
}

std::string format4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s = buf;
    if (s == "-0.0000") s = "0.0000";
    return s;
}

namespace {

// The 4-digit value as a JSON number, so JSON and CSV carry the same values.
json json4(double v) { return json::parse(format4(v)); }

}  // namespace

std::string format_report(const ResultsTable& r, ReportFormat format) {
    if (format == ReportFormat::csv) {
        std::string out = "method,auc_avg,auc_std,eo_diff_avg,eo_diff_std,wacc_avg,wacc_std,af_avg,af_std\n";
        for (const auto& s : r.summary) {
            out += method_label(s.method);
            for (const auto* ms : {&s.auc, &s.eo_diff, &s.wacc, &s.af}) out += "," + format4(ms->mean) + "," + format4(ms->std);
            out += "\n";
        }
        return out;
    }
    json summary = json::array();
    for (const auto& s : r.summary) {
        summary.push_back({{"method", method_label(s.method)},
                           {"auc_avg", json4(s.auc.mean)},
                           {"auc_std", json4(s.auc.std)},
                           {"eo_diff_avg", json4(s.eo_diff.mean)},
                           {"eo_diff_std", json4(s.eo_diff.std)},
                           {"wacc_avg", json4(s.wacc.mean)},
                           {"wacc_std", json4(s.wacc.std)},
                           {"af_avg", json4(s.af.mean)},
                           {"af_std", json4(s.af.std)}});
    }
    json trials = json::array();
    for (const auto& t : r.trials) {
        trials.push_back({{"method", method_label(t.method)},
                          {"trial", t.trial},
                          {"seed", t.seed},
                          {"sample_units", t.sample_units},
                          {"auc_avg", json4(t.auc_avg)},
                          {"eo_diff_avg", json4(t.eo_diff_avg)},
                          {"wacc_avg", json4(t.wacc_avg)},
                          {"af_avg", json4(t.af_avg)}});
    }
    return json({{"summary", summary}, {"trials", trials}}).dump(2) + "\n";
}

void emit_report(const ResultsTable& r, ReportFormat format, const fs::path& path) {
    detail::write_file(path, format_report(r, format));
}

}  // namespace fairhead
