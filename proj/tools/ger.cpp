// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: corpus ingestion, synthetic generation, aspect
// scoring, normalization, table building, training, evaluation, full
// experiment runs, ablations and per-pair interpretability reports.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ger/aspects.hpp"
#include "ger/common.hpp"
#include "ger/corpus.hpp"
#include "ger/guided.hpp"
#include "ger/harness.hpp"
#include "ger/metrics.hpp"
#include "ger/scorer.hpp"
#include "ger/seqrec.hpp"

namespace {

using namespace ger;

aspects::AspectCatalog catalog_from_flags(const std::string& name_or_path,
                                          std::size_t truncate_to = 0) {
    aspects::AspectCatalog catalog;
    if (name_or_path == "movies" || name_or_path == "clothing" || name_or_path == "games")
        catalog = aspects::builtin_catalog(aspects::parse_domain(name_or_path));
    else
        catalog = aspects::load_catalog_file(name_or_path);
    if (truncate_to > 0 && truncate_to < catalog.size())
        catalog = aspects::truncate_catalog(catalog, truncate_to);
    return catalog;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::istringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stoi(trim(part)));
    if (out.empty()) throw ConfigError("expected a comma-separated list, got '" + csv + "'");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(std::stod(trim(part)));
    if (out.empty()) throw ConfigError("expected a comma-separated list, got '" + csv + "'");
    return out;
}

int cmd_ingest(const std::string& reviews, const std::string& meta, std::size_t min_user,
               std::size_t min_item, const std::string& out) {
    corpus::ReviewLoadResult r = corpus::load_reviews(reviews);
    corpus::MetadataLoadResult m = corpus::load_metadata(meta);
    std::cerr << "reviews: " << r.interactions.size() << " parsed, " << r.malformed
              << " malformed\n";
    std::cerr << "metadata: " << m.records.size() << " records, " << m.malformed
              << " malformed, " << m.duplicates << " duplicates\n";
    corpus::PreprocessCounts counts;
    corpus::Dataset ds = corpus::preprocess(r.interactions, m.records, min_item, min_user,
                                            &counts);
    std::cerr << "filtered: " << counts.duplicate_interactions << " duplicate interactions, "
              << counts.unknown_item_interactions << " without metadata, "
              << counts.removed_items << " items and " << counts.removed_users
              << " users below threshold (" << counts.filter_rounds << " rounds)\n";
    corpus::save_dataset(ds, out);
    std::cout << "dataset: " << ds.stats.num_users << " users, " << ds.stats.num_items
              << " items, " << ds.stats.num_reviews << " reviews -> " << out << "\n";
    return 0;
}

int cmd_synth(const corpus::SyntheticSpec& spec, const std::string& out) {
    corpus::Dataset ds = corpus::generate_synthetic(spec);
    corpus::save_dataset(ds, out);
    std::cout << "synthetic dataset: " << ds.stats.num_users << " users, "
              << ds.stats.num_items << " items, " << ds.stats.num_reviews << " reviews -> "
              << out << "\n";
    return 0;
}

int cmd_score(const std::string& dataset_path, const std::string& catalog_flag,
              const std::string& backend_kind, const std::string& cache_path,
              const std::string& endpoint, const std::string& model, double temperature,
              std::uint64_t mock_seed, const std::string& what, std::size_t inflight,
              std::size_t max_reviews) {
    corpus::Dataset ds = corpus::load_dataset(dataset_path);
    aspects::AspectCatalog catalog = catalog_from_flags(catalog_flag);
    std::unique_ptr<scorer::ScorerBackend> backend;
    if (backend_kind == "oracle") {
        if (!ds.planted) throw ConfigError("oracle backend needs a dataset with planted truth");
        backend = std::make_unique<scorer::PlantedOracleBackend>(*ds.planted);
    } else if (backend_kind == "mock") {
        backend = std::make_unique<scorer::MockBackend>(mock_seed);
    } else if (backend_kind == "http") {
        scorer::HttpChatConfig http;
        http.endpoint = endpoint;
        http.model = model;
        http.temperature = temperature;
        backend = std::make_unique<scorer::HttpChatBackend>(http);
    } else {
        throw ConfigError("backend must be mock, oracle or http");
    }

    scorer::ScoreCache cache = scorer::ScoreCache::load(cache_path);
    if (cache.corrupt_skipped() > 0)
        std::cerr << "cache: skipped " << cache.corrupt_skipped() << " corrupt line(s)\n";
    corpus::SplitDataset split = corpus::split_leave_one_out(ds);
    std::size_t failures = 0;
    if (what == "items" || what == "both") {
        scorer::BatchScoreResult r =
            scorer::score_all_items(*backend, ds, catalog, cache, inflight);
        std::cout << "items scored: " << r.scores.size() << ", unscorable: "
                  << r.failed.size() << "\n";
        failures += r.failed.size();
    }
    if (what == "users" || what == "both") {
        scorer::BatchScoreResult r = scorer::score_all_users(*backend, ds, &split, catalog,
                                                             cache, inflight, max_reviews);
        std::cout << "users scored: " << r.scores.size() << ", unscorable: "
                  << r.failed.size() << "\n";
        failures += r.failed.size();
    }
    cache.store(cache_path);
    std::cout << "cache: " << cache.size() << " entries -> " << cache_path << "\n";
    return failures == 0 ? 0 : 1;
}

int cmd_normalize(const std::string& scores_path, std::size_t refined_dim,
                  const std::string& out) {
    scorer::ScoreCache cache = scorer::ScoreCache::load(scores_path);
    std::map<std::string, std::vector<double>> items = cache.collect("item");
    if (items.size() < 2) throw Error("normalize: need scores for at least 2 items");
    std::size_t m = items.begin()->second.size();
    Eigen::MatrixXd matrix(static_cast<long>(items.size()), static_cast<long>(m));
    long row = 0;
    for (const auto& [id, s] : items) {
        if (s.size() != m) throw Error("normalize: mixed score lengths in cache");
        for (std::size_t j = 0; j < m; ++j) matrix(row, static_cast<long>(j)) = s[j];
        ++row;
    }
    guided::Normalizer n = guided::fit_normalizer(matrix, refined_dim);
    guided::save_normalizer(n, out);
    std::cout << "normalizer over " << items.size() << " items, target std "
              << format_fixed(n.target_std, 6) << " -> " << out << "\n";
    return 0;
}

int cmd_table(const std::string& dataset_path, const std::string& scores_path,
              std::size_t base_dim, std::size_t guided_dim, double mu, std::uint64_t seed,
              const std::string& out) {
    corpus::Dataset ds = corpus::load_dataset(dataset_path);
    guided::RefinedConfig rc{base_dim, guided_dim, mu};
    scorer::ScoreCache cache = scorer::ScoreCache::load(scores_path);
    std::map<std::string, std::vector<double>> items = cache.collect("item");
    std::map<std::string, std::vector<double>> users = cache.collect("user");
    guided::EmbeddingTable table;
    std::map<std::string, std::vector<double>> users_norm;
    if (guided_dim == 0) {
        table = guided::build_table(ds.items, {}, nullptr, rc, seed);
        guided::save_table(table, users_norm, nullptr, out);
    } else {
        Eigen::MatrixXd matrix(static_cast<long>(items.size()), static_cast<long>(guided_dim));
        long row = 0;
        for (const auto& [id, s] : items) {
            if (s.size() != guided_dim)
                throw Error("table: cached scores have length " + std::to_string(s.size()) +
                            ", expected " + std::to_string(guided_dim));
            for (std::size_t j = 0; j < guided_dim; ++j)
                matrix(row, static_cast<long>(j)) = s[j];
            ++row;
        }
        guided::Normalizer n = guided::fit_normalizer(matrix, rc.refined_dim());
        table = guided::build_table(ds.items, items, &n, rc, seed);
        for (const auto& [id, s] : users) users_norm[id] = guided::normalize(n, s);
        guided::save_table(table, users_norm, &n, out);
    }
    std::cout << "table: " << table.num_items() << " items, dims " << base_dim << "+"
              << guided_dim << " -> " << out << "\n";
    return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& table_path,
              const std::string& encoder, const std::string& variant, std::size_t epochs,
              std::size_t batch, double lr, std::uint64_t seed, std::size_t max_seq_len,
              std::size_t heads, double dropout, const std::string& out) {
    corpus::Dataset ds = corpus::load_dataset(dataset_path);
    guided::LoadedTable loaded = guided::load_table(table_path);
    corpus::SplitDataset split = corpus::split_leave_one_out(ds);
    seqrec::ModelConfig mc;
    mc.encoder = seqrec::parse_encoder(encoder);
    mc.user_variant = seqrec::parse_variant(variant);
    mc.max_seq_len = max_seq_len;
    mc.num_heads = heads;
    mc.dropout = dropout;
    seqrec::Model model = seqrec::init_model(mc, loaded.table.config,
                                             mix64(seed ^ fnv1a64("model-init")));
    seqrec::TrainConfig tc{epochs, batch, lr, mix64(seed ^ fnv1a64("train-loop"))};
    seqrec::TrainResult result = seqrec::train(std::move(model), std::move(loaded.table), ds,
                                               split, loaded.user_guided, tc);
    seqrec::save_model(result.model, out);
    guided::save_table(result.table, loaded.user_guided,
                       loaded.normalizer ? &*loaded.normalizer : nullptr,
                       out + ".table");
    if (!result.loss_curve.empty())
        std::cout << "final epoch loss: " << format_fixed(result.loss_curve.back(), 6) << "\n";
    std::cout << "model -> " << out << ", trained table -> " << out << ".table\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path,
             const std::string& table_path, const std::string& ks_csv) {
    corpus::Dataset ds = corpus::load_dataset(dataset_path);
    guided::LoadedTable loaded = guided::load_table(table_path);
    seqrec::Model model = seqrec::load_model(model_path);
    corpus::SplitDataset split = corpus::split_leave_one_out(ds);
    metrics::MetricReport report = seqrec::evaluate(model, loaded.table, ds, split,
                                                    loaded.user_guided, parse_int_list(ks_csv));
    std::cout << "users: " << report.n_users << "\n";
    for (const std::string& name : metrics::metric_names(report))
        std::cout << name << ": " << format_fixed(metrics::metric_value(report, name), 4)
                  << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, std::size_t workers) {
    harness::ExperimentConfig config = harness::ExperimentConfig::from_file(config_path);
    harness::ComparisonReport report = harness::run_experiment(config, workers);
    harness::write_report_files(report, config.out_dir);
    std::cout << report.to_text();
    std::cout << "\nreports -> " << config.out_dir << "/report.{txt,json}\n";
    return 0;
}

int cmd_ablate(const std::string& which, const std::string& config_path,
               const std::string& dims_csv, const std::string& values_csv,
               std::size_t workers) {
    harness::ExperimentConfig config = harness::ExperimentConfig::from_file(config_path);
    std::filesystem::create_directories(config.out_dir);
    std::string stem = "ablate_" + which;
    std::string text, json_text;
    if (which == "guided-dim") {
        std::vector<std::size_t> dims;
        for (int d : parse_int_list(dims_csv.empty() ? "3,6,9,12" : dims_csv))
            dims.push_back(static_cast<std::size_t>(d));
        harness::AblationReport r = harness::ablate_guided_dim(config, dims, workers);
        text = r.to_text();
        json_text = r.to_json_text();
    } else if (which == "base-dim") {
        std::vector<std::size_t> dims;
        for (int d : parse_int_list(dims_csv.empty() ? "10,20,40,60" : dims_csv))
            dims.push_back(static_cast<std::size_t>(d));
        harness::AblationReport r = harness::ablate_base_dim(config, dims, workers);
        text = r.to_text();
        json_text = r.to_json_text();
    } else if (which == "mu") {
        std::vector<double> values =
            parse_double_list(values_csv.empty() ? "0.25,0.5,1,2,4" : values_csv);
        harness::AblationReport r = harness::ablate_mu(config, values, workers);
        text = r.to_text();
        json_text = r.to_json_text();
    } else if (which == "task") {
        harness::TaskAblationReport r = harness::ablate_finetune_task(config, workers);
        text = r.to_text();
        json_text = r.to_json_text();
    } else {
        throw ConfigError("ablate: expected guided-dim, base-dim, mu or task");
    }
    write_text_file(config.out_dir + "/" + stem + ".txt", text);
    write_text_file(config.out_dir + "/" + stem + ".json", json_text);
    std::cout << text;
    std::cout << "\nreports -> " << config.out_dir << "/" << stem << ".{txt,json}\n";
    return 0;
}

int cmd_explain(const std::string& user_id, const std::string& item_id,
                const std::string& aspects_csv, const std::string& scores_path,
                const std::string& catalog_flag, std::size_t guided_dim,
                const std::string& out) {
    aspects::AspectCatalog catalog = catalog_from_flags(catalog_flag, guided_dim);
    scorer::ScoreCache cache = scorer::ScoreCache::load(scores_path);
    std::map<std::string, std::vector<double>> items =
        cache.collect("item", catalog.fingerprint());
    std::map<std::string, std::vector<double>> users =
        cache.collect("user", catalog.fingerprint());
    if (items.empty() && users.empty()) {
        // fall back to any catalog if the cache was built with another one
        items = cache.collect("item");
        users = cache.collect("user");
    }
    std::vector<std::string> selected;
    if (!aspects_csv.empty()) {
        std::istringstream ss(aspects_csv);
        std::string part;
        while (std::getline(ss, part, ',')) selected.push_back(trim(part));
    }
    harness::InterpretabilityReport report =
        harness::interpretability_report(user_id, item_id, items, users, catalog, selected);
    std::cout << report.text;
    if (!out.empty()) {
        write_text_file(out, report.json_text);
        std::cout << "machine-readable block -> " << out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"guided embedding refinement toolkit for sequential recommenders"};
    app.require_subcommand(1);

    // ingest
    std::string reviews_path, meta_path, out_path;
    std::size_t min_user = 5, min_item = 5;
    CLI::App* ingest = app.add_subcommand("ingest", "clean a raw review corpus into an archive");
    ingest->add_option("--reviews", reviews_path)->required();
    ingest->add_option("--meta", meta_path)->required();
    ingest->add_option("--min-user", min_user, "minimum interactions per user");
    ingest->add_option("--min-item", min_item, "minimum interactions per item");
    ingest->add_option("--out", out_path)->required();

    // synth
    corpus::SyntheticSpec spec;
    std::string synth_out;
    CLI::App* synth = app.add_subcommand("synth", "generate a planted synthetic corpus");
    synth->add_option("--users", spec.num_users);
    synth->add_option("--items", spec.num_items);
    synth->add_option("--aspects", spec.num_aspects);
    synth->add_option("--seed", spec.seed);
    synth->add_option("--noise", spec.noise_scale);
    synth->add_option("--seq-min", spec.seq_len_min);
    synth->add_option("--seq-max", spec.seq_len_max);
    synth->add_option("--out", synth_out)->required();

    // score
    std::string score_dataset, score_catalog = "movies", score_backend = "oracle";
    std::string score_cache, score_endpoint, score_model, score_what = "both";
    double score_temperature = 0.0;
    std::uint64_t score_mock_seed = 1;
    std::size_t score_inflight = 4, score_max_reviews = 10;
    CLI::App* score = app.add_subcommand("score", "score items and users on catalog aspects");
    score->add_option("--dataset", score_dataset)->required();
    score->add_option("--catalog", score_catalog, "movies|clothing|games or a catalog file");
    score->add_option("--backend", score_backend, "mock|oracle|http");
    score->add_option("--cache", score_cache)->required();
    score->add_option("--endpoint", score_endpoint);
    score->add_option("--model", score_model);
    score->add_option("--temperature", score_temperature);
    score->add_option("--mock-seed", score_mock_seed);
    score->add_option("--what", score_what, "items|users|both");
    score->add_option("--inflight", score_inflight, "concurrent requests");
    score->add_option("--max-reviews", score_max_reviews);

    // normalize
    std::string norm_scores, norm_out;
    std::size_t norm_refined_dim = 60;
    CLI::App* normalize = app.add_subcommand("normalize", "fit score normalization statistics");
    normalize->add_option("--scores", norm_scores)->required();
    normalize->add_option("--refined-dim", norm_refined_dim);
    normalize->add_option("--out", norm_out)->required();

    // table
    std::string table_dataset, table_scores, table_out;
    std::size_t table_base = 48, table_guided = 12;
    double table_mu = 1.0;
    std::uint64_t table_seed = 1;
    CLI::App* table = app.add_subcommand("table", "build an embedding table from scores");
    table->add_option("--dataset", table_dataset)->required();
    table->add_option("--scores", table_scores);
    table->add_option("--base-dim", table_base);
    table->add_option("--guided-dim", table_guided);
    table->add_option("--mu", table_mu);
    table->add_option("--seed", table_seed);
    table->add_option("--out", table_out)->required();

    // train
    std::string train_dataset, train_table, train_encoder = "gru";
    std::string train_variant = "concat", train_out;
    std::size_t train_epochs = 50, train_batch = 16, train_seq = 50, train_heads = 1;
    double train_lr = 1e-3, train_dropout = 0.0;
    std::uint64_t train_seed = 1;
    CLI::App* train = app.add_subcommand("train", "train a sequential recommender");
    train->add_option("--dataset", train_dataset)->required();
    train->add_option("--table", train_table)->required();
    train->add_option("--encoder", train_encoder, "gru|attn");
    train->add_option("--variant", train_variant, "concat|seqref");
    train->add_option("--epochs", train_epochs);
    train->add_option("--batch", train_batch);
    train->add_option("--lr", train_lr);
    train->add_option("--seed", train_seed);
    train->add_option("--max-seq-len", train_seq);
    train->add_option("--heads", train_heads);
    train->add_option("--dropout", train_dropout);
    train->add_option("--out", train_out)->required();

    // eval
    std::string eval_model, eval_dataset, eval_table, eval_ks = "1,5,10,20";
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval->add_option("--model", eval_model)->required();
    eval->add_option("--dataset", eval_dataset)->required();
    eval->add_option("--table", eval_table)->required();
    eval->add_option("--ks", eval_ks);

    // run
    std::string run_config;
    std::size_t run_workers = 0;
    CLI::App* run = app.add_subcommand("run", "run a base-vs-refined experiment from a config");
    run->add_option("--config", run_config)->required();
    run->add_option("--workers", run_workers, "parallel (seed, arm) runs; 0 = auto");

    // ablate
    std::string ablate_which, ablate_config, ablate_dims, ablate_values;
    std::size_t ablate_workers = 0;
    CLI::App* ablate = app.add_subcommand("ablate", "guided-dim | base-dim | mu | task sweeps");
    ablate->add_option("which", ablate_which, "guided-dim|base-dim|mu|task")->required();
    ablate->add_option("--config", ablate_config)->required();
    ablate->add_option("--dims", ablate_dims, "comma-separated dimension list");
    ablate->add_option("--values", ablate_values, "comma-separated mu list");
    ablate->add_option("--workers", ablate_workers);

    // explain
    std::string explain_user, explain_item, explain_aspects, explain_scores;
    std::string explain_catalog = "movies", explain_out;
    std::size_t explain_guided_dim = 0;
    CLI::App* explain = app.add_subcommand("explain", "aspect alignment for one user/item pair");
    explain->add_option("--user", explain_user)->required();
    explain->add_option("--item", explain_item)->required();
    explain->add_option("--aspects", explain_aspects, "comma-separated aspect names");
    explain->add_option("--scores", explain_scores)->required();
    explain->add_option("--catalog", explain_catalog);
    explain->add_option("--guided-dim", explain_guided_dim, "truncate the catalog to this size");
    explain->add_option("--out", explain_out, "write the machine-readable block here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed())
            return cmd_ingest(reviews_path, meta_path, min_user, min_item, out_path);
        if (synth->parsed()) return cmd_synth(spec, synth_out);
        if (score->parsed())
            return cmd_score(score_dataset, score_catalog, score_backend, score_cache,
                             score_endpoint, score_model, score_temperature, score_mock_seed,
                             score_what, score_inflight, score_max_reviews);
        if (normalize->parsed()) return cmd_normalize(norm_scores, norm_refined_dim, norm_out);
        if (table->parsed())
            return cmd_table(table_dataset, table_scores, table_base, table_guided, table_mu,
                             table_seed, table_out);
        if (train->parsed())
            return cmd_train(train_dataset, train_table, train_encoder, train_variant,
                             train_epochs, train_batch, train_lr, train_seed, train_seq,
                             train_heads, train_dropout, train_out);
        if (eval->parsed()) return cmd_eval(eval_model, eval_dataset, eval_table, eval_ks);
        if (run->parsed()) return cmd_run(run_config, run_workers);
        if (ablate->parsed())
            return cmd_ablate(ablate_which, ablate_config, ablate_dims, ablate_values,
                              ablate_workers);
        if (explain->parsed())
            return cmd_explain(explain_user, explain_item, explain_aspects, explain_scores,
                               explain_catalog, explain_guided_dim, explain_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
