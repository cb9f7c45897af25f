// mil, probe and survival: heads on frozen embeddings.

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "cli.hpp"

#include "cellgraph/heads/mil.hpp"
#include "cellgraph/heads/probe.hpp"
#include "cellgraph/numerics/rng.hpp"
#include "cellgraph/pretrain/embed.hpp"
#include "cellgraph/survival/survival.hpp"
#include "cellgraph/util/csv.hpp"

namespace fs = std::filesystem;

namespace cellgraph::cli {

namespace {

Matrix take_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), x.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) std::copy_n(x.row(rows[k]).begin(), x.cols(), out.row(k).begin());
    return out;
}

std::size_t class_count(std::span<const std::uint32_t> labels) {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + std::size_t{1};
}

nlohmann::json metrics_json(const heads::ClassificationMetrics& m) {
    return {{"macro_f1", m.macro_f1}, {"balanced_accuracy", m.balanced_accuracy}, {"auroc", m.auroc}, {"auprc", m.auprc}};
}

std::vector<heads::MilHyper> read_grid(const std::string& spec) {
    if (spec == "default") return heads::default_mil_grid();
    const CsvTable t = read_csv(spec);
    const auto lr = t.column("learning_rate"), dropout = t.column("dropout"), att = t.column("attention_dim"),
               layers = t.column("classifier_layers");
    std::vector<heads::MilHyper> grid;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        grid.push_back({t.number<double>(r, lr), t.number<double>(r, dropout), t.number<std::size_t>(r, att),
                        t.number<int>(r, layers)});
    if (grid.empty()) throw std::runtime_error(spec + ": empty grid");
    return grid;
}

// ---- mil

struct MilOptions {
    fs::path embeddings, labels, out;
    std::string variant = "all";
    std::string grid = "default";
    std::string dataset;
    int folds = 5, epochs = 100, patience = 20;
    std::size_t batch_bags = 16;
};

void run_mil(const MilOptions& o, const CLI::App& cmd, const Globals& g) {
    const auto table = pretrain::read_embeddings(o.embeddings);
    if (table.level != pretrain::EmbeddingLevel::region)
        throw std::runtime_error(o.embeddings.string() + ": mil needs region-level embeddings");
    const CsvTable labels = read_csv(o.labels);
    const auto rec_col = labels.column("record"), bag_col = labels.column("bag"), label_col = labels.column("label");
    const auto split_col = labels.find("split");
    struct Row {
        std::size_t bag;
        std::uint32_t label;
        bool test;
    };
    std::map<std::size_t, Row> by_record;
    for (std::size_t r = 0; r < labels.rows.size(); ++r)
        by_record[labels.number<std::size_t>(r, rec_col)] = {labels.number<std::size_t>(r, bag_col),
                                                              labels.number<std::uint32_t>(r, label_col),
                                                              split_col && labels.rows[r][*split_col] == "test"};

    std::vector<std::size_t> rows[2], bag_ids[2];
    std::vector<std::uint32_t> row_labels[2];
    std::size_t unlabelled = 0;
    for (std::size_t k = 0; k < table.records.size(); ++k) {
        const auto it = by_record.find(table.records[k]);
        if (it == by_record.end()) {
            ++unlabelled;
            continue;
        }
        const int side = it->second.test ? 1 : 0;
        rows[side].push_back(k);
        bag_ids[side].push_back(it->second.bag);
        row_labels[side].push_back(it->second.label);
    }
    if (unlabelled) spdlog::warn("{} embedding rows have no entry in {}", unlabelled, o.labels.string());
    if (rows[0].empty()) throw std::runtime_error("no training rows after joining embeddings and labels");
    const auto train = heads::Bags::group(take_rows(table.values, rows[0]), bag_ids[0], row_labels[0]);
    heads::Bags test;
    test.instances = Matrix(0, table.dim());
    if (!rows[1].empty()) test = heads::Bags::group(take_rows(table.values, rows[1]), bag_ids[1], row_labels[1]);
    const std::size_t classes = std::max(class_count(train.labels), class_count(test.labels));
    const bool has_test = test.count() > 0;
    spdlog::info("{} training bags, {} test bags, {} classes", train.count(), test.count(), classes);

    std::vector<heads::MilVariant> variants;
    if (o.variant == "all") variants.assign(std::begin(heads::kMilVariants), std::end(heads::kMilVariants));
    else variants.push_back(heads::parse_variant(o.variant));
    const std::string dataset = o.dataset.empty() ? o.embeddings.stem().string() : o.dataset;

    fs::create_directories(o.out);
    std::ofstream results(o.out / "results.csv");
    results << "dataset,variant,config,fold,metric,value\n";
    std::ofstream summary_csv(o.out / "summary.csv");
    summary_csv << "dataset,variant,config,mean_val_macro_f1,macro_f1,balanced_accuracy,auroc,auprc\n";
    nlohmann::json summary = {{"dataset", dataset}, {"train_bags", train.count()}, {"test_bags", test.count()},
                              {"variants", nlohmann::json::object()}};
    std::string best_variant;
    double best_score = -1.0;
    for (const auto variant : variants) {
        heads::MilTrainConfig config;
        config.variant = variant;
        config.grid = read_grid(o.grid);
        config.folds = o.folds;
        config.epochs = o.epochs;
        config.patience = o.patience;
        config.batch_bags = o.batch_bags;
        config.seed = g.seed;
        config.threads = g.threads;
        const auto name = heads::to_string(variant);
        spdlog::info("{}: {} grid cells x {} folds", name, config.grid.size(), config.folds);
        const auto result = heads::mil_train(train, test, classes, config);
        for (const auto& cell : result.grid)
            for (std::size_t f = 0; f < cell.folds.size(); ++f)
                results << dataset << ',' << name << ',' << heads::describe(cell.hyper) << ',' << f << ",val_macro_f1,"
                        << num(cell.folds[f].val_macro_f1) << '\n';
        const auto& best = result.grid[result.best];
        const auto config_name = heads::describe(best.hyper);
        const auto m = result.test;
        if (has_test)
            for (const auto& [metric, value] : {std::pair{"macro_f1", m.macro_f1}, {"balanced_accuracy", m.balanced_accuracy},
                                                {"auroc", m.auroc}, {"auprc", m.auprc}})
                results << dataset << ',' << name << ',' << config_name << ",test," << metric << ',' << num(value) << '\n';
        summary_csv << dataset << ',' << name << ',' << config_name << ',' << num(best.mean_val_macro_f1) << ','
                    << num(m.macro_f1) << ',' << num(m.balanced_accuracy) << ',' << num(m.auroc) << ',' << num(m.auprc)
                    << '\n';
        summary["variants"][name] = {{"config", config_name}, {"mean_val_macro_f1", best.mean_val_macro_f1}};
        if (has_test) summary["variants"][name]["test"] = metrics_json(m);
        // Without a test split the choice falls back to validation.
        const double score = has_test ? m.macro_f1 : best.mean_val_macro_f1;
        spdlog::info("{}: best {} val {:.3f}{}", name, config_name, best.mean_val_macro_f1,
                     has_test ? fmt::format(" test macro-F1 {:.3f}", m.macro_f1) : "");
        if (score > best_score) {
            best_score = score;
            best_variant = name;
        }
    }
    summary["best_variant"] = best_variant;
    summary["selected_by"] = has_test ? "test_macro_f1" : "mean_val_macro_f1";
    std::ofstream(o.out / "summary.json") << summary.dump(2) << '\n';
    write_run_record(o.out, true, cmd, g, summary);
}

// ---- probe

struct ProbeOptions {
    fs::path embeddings, labels, out;
    int folds = 5;
    double l2 = 1e-3;
};

void run_probe(const ProbeOptions& o, const CLI::App& cmd, const Globals& g) {
    const auto table = pretrain::read_embeddings(o.embeddings);
    const bool cells = table.level == pretrain::EmbeddingLevel::cell;
    const CsvTable labels = read_csv(o.labels);
    const auto rec_col = labels.column("record"), label_col = labels.column("label");
    const auto node_col = labels.find("node"), fold_col = labels.find("fold");
    if (cells && !node_col) throw std::runtime_error(o.labels.string() + ": cell embeddings need a node column");
    std::map<std::pair<std::size_t, std::size_t>, std::pair<std::uint32_t, std::string>> by_key;
    for (std::size_t r = 0; r < labels.rows.size(); ++r) {
        const std::size_t node = cells ? labels.number<std::size_t>(r, *node_col) : 0;
        by_key[{labels.number<std::size_t>(r, rec_col), node}] = {labels.number<std::uint32_t>(r, label_col),
                                                                   fold_col ? labels.rows[r][*fold_col] : ""};
    }

    std::vector<std::size_t> rows, records;
    std::vector<std::uint32_t> y;
    std::vector<std::string> tags;
    for (std::size_t k = 0; k < table.records.size(); ++k) {
        const auto it = by_key.find({table.records[k], cells ? table.nodes[k] : 0});
        if (it == by_key.end()) continue;
        rows.push_back(k);
        records.push_back(table.records[k]);
        y.push_back(it->second.first);
        tags.push_back(it->second.second);
    }
    if (rows.empty()) throw std::runtime_error("no rows after joining embeddings and labels");
    if (!fold_col) {
        // Whole records go to one fold so cells of a graph never straddle train and test.
        std::vector<std::size_t> distinct(records);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < static_cast<std::size_t>(o.folds))
            throw std::runtime_error(std::to_string(distinct.size()) + " records cannot fill " + std::to_string(o.folds) + " folds");
        Rng rng = Rng::derive(g.seed, 0x70726f6265);
        rng.shuffle(distinct);
        std::map<std::size_t, std::string> fold_of;
        for (std::size_t i = 0; i < distinct.size(); ++i) fold_of[distinct[i]] = "fold" + std::to_string(i % o.folds);
        for (std::size_t i = 0; i < rows.size(); ++i) tags[i] = fold_of[records[i]];
    }
    heads::ProbeConfig config;
    config.l2 = o.l2;
    const auto folds = heads::probe_folds(take_rows(table.values, rows), y, class_count(y), tags, config);

    fs::create_directories(o.out);
    std::ofstream results(o.out / "results.csv");
    results << "fold,macro_f1,balanced_accuracy,auroc,auprc\n";
    heads::ClassificationMetrics mean;
    for (const auto& f : folds) {
        const auto& m = f.metrics;
        results << f.fold << ',' << num(m.macro_f1) << ',' << num(m.balanced_accuracy) << ',' << num(m.auroc) << ','
                << num(m.auprc) << '\n';
        const double w = 1.0 / static_cast<double>(folds.size());
        mean.macro_f1 += w * m.macro_f1;
        mean.balanced_accuracy += w * m.balanced_accuracy;
        mean.auroc += w * m.auroc;
        mean.auprc += w * m.auprc;
    }
    results << "mean," << num(mean.macro_f1) << ',' << num(mean.balanced_accuracy) << ',' << num(mean.auroc) << ','
            << num(mean.auprc) << '\n';
    spdlog::info("probe over {} folds: macro-F1 {:.3f}, balanced accuracy {:.3f}", folds.size(), mean.macro_f1,
                 mean.balanced_accuracy);
    nlohmann::json summary = {{"rows", rows.size()}, {"folds", folds.size()}, {"mean", metrics_json(mean)}};
    std::ofstream(o.out / "summary.json") << summary.dump(2) << '\n';
    write_run_record(o.out, true, cmd, g, summary);
}

// ---- survival

struct SurvivalOptions {
    fs::path embeddings, clinical, out;
    double l2 = 0.1;
    int folds = 5;
};

void write_km(const fs::path& path, const survival::Outcomes& y) {
    std::ofstream f(path);
    f << "time,survival,at_risk,events\n";
    f << "0,1," << y.size() << ",0\n";
    for (const auto& s : survival::kaplan_meier(y))
        f << num(s.time) << ',' << num(s.survival) << ',' << s.at_risk << ',' << s.events << '\n';
}

void run_survival(const SurvivalOptions& o, const CLI::App& cmd, const Globals& g) {
    const auto table = pretrain::read_embeddings(o.embeddings);
    if (table.level != pretrain::EmbeddingLevel::region)
        throw std::runtime_error(o.embeddings.string() + ": survival needs region-level embeddings");
    std::map<std::size_t, std::size_t> row_of;
    for (std::size_t k = 0; k < table.records.size(); ++k) row_of[table.records[k]] = k;

    const CsvTable clinical = read_csv(o.clinical);
    const auto pid = clinical.column("patient_id"), time = clinical.column("time"), event = clinical.column("event");
    const auto rec = clinical.find("record");
    struct Patient {
        std::string id;
        double time;
        bool event;
        std::vector<std::size_t> rows;
    };
    std::vector<Patient> patients;
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < clinical.rows.size(); ++r) {
        const std::string& id = clinical.rows[r][pid];
        const std::size_t record = clinical.number<std::size_t>(r, rec ? *rec : pid);
        const double t = clinical.number<double>(r, time);
        const bool e = clinical.number<int>(r, event) != 0;
        const auto [it, fresh] = index.emplace(id, patients.size());
        if (fresh) patients.push_back({id, t, e, {}});
        auto& p = patients[it->second];
        if (p.time != t || p.event != e) throw std::runtime_error(o.clinical.string() + ": conflicting outcomes for " + id);
        const auto row = row_of.find(record);
        if (row == row_of.end()) throw std::runtime_error(o.clinical.string() + ": record " + std::to_string(record) + " has no embedding");
        p.rows.push_back(row->second);
    }
    if (patients.empty()) throw std::runtime_error(o.clinical.string() + ": no patients");

    // One covariate row per patient: the mean of its region embeddings.
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(patients.size()), static_cast<Eigen::Index>(table.dim()));
    survival::Outcomes y;
    for (std::size_t i = 0; i < patients.size(); ++i) {
        for (const auto r : patients[i].rows)
            for (std::size_t c = 0; c < table.dim(); ++c) x(i, c) += table.values(r, c);
        x.row(i) /= static_cast<double>(patients[i].rows.size());
        y.times.push_back(patients[i].time);
        y.events.push_back(patients[i].event);
    }
    y.validate();

    survival::CoxConfig config;
    config.l2 = o.l2;
    const auto model = survival::cox_fit(x, y, config);
    if (!model.converged) spdlog::warn("Cox fit stopped after {} iterations (gradient {:.2e})", model.iterations, model.gradient_norm);
    const Eigen::VectorXd risk = model.risk(x);
    const std::vector<double> risks(risk.data(), risk.data() + risk.size());
    const auto high = survival::risk_split(risks);
    survival::Outcomes groups[2];  // low, high
    for (std::size_t i = 0; i < patients.size(); ++i) {
        groups[high[i]].times.push_back(y.times[i]);
        groups[high[i]].events.push_back(y.events[i]);
    }
    if (groups[0].size() == 0 || groups[1].size() == 0) throw std::runtime_error("risk split left an empty group");
    const auto lr = survival::logrank(groups[1], groups[0]);
    const double c = survival::c_index(risks, y);
    const double cv_c = survival::cross_validated_c_index(x, y, o.folds, g.seed, config);

    fs::create_directories(o.out);
    write_km(o.out / "km_high.csv", groups[1]);
    write_km(o.out / "km_low.csv", groups[0]);
    std::ofstream(o.out / "stats.csv") << "c_index,chi2,p_value\n" << num(c) << ',' << num(lr.statistic) << ',' << num(lr.p_value) << '\n';
    std::ofstream risks_csv(o.out / "risks.csv");
    risks_csv << "patient_id,risk,group\n";
    for (std::size_t i = 0; i < patients.size(); ++i)
        risks_csv << patients[i].id << ',' << num(risks[i]) << ',' << (high[i] ? "high" : "low") << '\n';
    spdlog::info("{} patients, {} events: C-index {:.3f} (cross-validated {:.3f}), log-rank chi2 {:.2f}, p {:.3g}",
                 patients.size(), y.event_count(), c, cv_c, lr.statistic, lr.p_value);
    nlohmann::json summary = {{"patients", patients.size()}, {"events", y.event_count()},
                              {"c_index", c},               {"cv_c_index", cv_c},
                              {"chi2", lr.statistic},        {"p_value", lr.p_value},
                              {"high_risk", groups[1].size()}, {"low_risk", groups[0].size()},
                              {"cox_converged", model.converged}};
    std::ofstream(o.out / "summary.json") << summary.dump(2) << '\n';
    write_run_record(o.out, true, cmd, g, summary);
}

}  // namespace

Command add_mil(CLI::App& root, const Globals& g) {
    auto o = std::make_shared<MilOptions>();
    auto* cmd = root.add_subcommand("mil", "Attention-based multiple-instance classification");
    cmd->add_option("--embeddings", o->embeddings, "Region embedding CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--labels", o->labels, "CSV record,bag,label[,split]")->required()->check(CLI::ExistingFile);
    cmd->add_option("--variant", o->variant, "abmil, add, conj or all")
        ->capture_default_str()
        ->check(CLI::IsMember({"abmil", "add", "conj", "all"}));
    cmd->add_option("--grid", o->grid, "'default' or a CSV learning_rate,dropout,attention_dim,classifier_layers")
        ->capture_default_str();
    cmd->add_option("--folds", o->folds)->capture_default_str()->check(CLI::Range(2, 100));
    cmd->add_option("--epochs", o->epochs)->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--patience", o->patience)->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--batch_bags,--batch-bags", o->batch_bags, "Bags per step")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--dataset", o->dataset, "Name in result rows (default: embeddings stem)");
    cmd->add_option("--out", o->out, "Output directory")->required();
    return {cmd, [o, cmd, &g] { run_mil(*o, *cmd, g); }};
}

Command add_probe(CLI::App& root, const Globals& g) {
    auto o = std::make_shared<ProbeOptions>();
    auto* cmd = root.add_subcommand("probe", "Cross-validated logistic regression on frozen embeddings");
    cmd->add_option("--embeddings", o->embeddings, "Embedding CSV (cell or region)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--labels", o->labels, "CSV record[,node],label[,fold]")->required()->check(CLI::ExistingFile);
    cmd->add_option("--folds", o->folds, "Folds when labels carry no fold column")->capture_default_str()->check(CLI::Range(2, 100));
    cmd->add_option("--l2", o->l2, "Weight penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", o->out, "Output directory")->required();
    return {cmd, [o, cmd, &g] { run_probe(*o, *cmd, g); }};
}

Command add_survival(CLI::App& root, const Globals& g) {
    auto o = std::make_shared<SurvivalOptions>();
    auto* cmd = root.add_subcommand("survival", "Cox model, risk groups, Kaplan-Meier and log-rank");
    cmd->add_option("--embeddings", o->embeddings, "Region embedding CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--clinical", o->clinical, "CSV patient_id,time,event[,record]")->required()->check(CLI::ExistingFile);
    cmd->add_option("--l2", o->l2, "Ridge penalty")->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--folds", o->folds, "Folds for the cross-validated C-index")->capture_default_str()->check(CLI::Range(2, 100));
    cmd->add_option("--out", o->out, "Output directory")->required();
    return {cmd, [o, cmd, &g] { run_survival(*o, *cmd, g); }};
}

}  // namespace cellgraph::cli
