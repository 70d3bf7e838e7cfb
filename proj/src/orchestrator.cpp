#include "flsim/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace flsim {

const char* const kVersionString = "flsim 0.1.0";

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_ids(const std::vector<int>& ids) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) os << '|';
        os << ids[i];
    }
    return os.str();
}

std::vector<int> split_ids(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, '|')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace

ParamVector aggregate_fedavg(const std::vector<ParamVector>& client_params,
                             const std::vector<long long>& sizes) {
    if (client_params.empty()) throw std::invalid_argument("aggregate_fedavg: no clients");
    if (client_params.size() != sizes.size()) {
        throw std::invalid_argument("aggregate_fedavg: params/sizes count mismatch");
    }
    const std::size_t dim = client_params.front().size();
    long long total = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (sizes[k] <= 0) throw std::invalid_argument("aggregate_fedavg: sizes must be positive");
        if (client_params[k].size() != dim) {
            throw std::invalid_argument("aggregate_fedavg: parameter length mismatch at client " +
                                        std::to_string(k));
        }
        total += sizes[k];
    }
    ParamVector out(dim, 0.0);
    for (std::size_t k = 0; k < client_params.size(); ++k) {
        double w = static_cast<double>(sizes[k]) / static_cast<double>(total);
        const auto& p = client_params[k];
        for (std::size_t j = 0; j < dim; ++j) out[j] += w * p[j];
    }
    return out;
}

std::optional<int> rounds_to_target(const std::vector<RoundRecord>& records,
                                    const std::string& metric, double target) {
    if (metric != "accuracy" && metric != "macro_f1") {
        throw std::invalid_argument("rounds_to_target: metric must be accuracy|macro_f1");
    }
    for (const auto& r : records) {
        double v = metric == "accuracy" ? r.global_accuracy : r.global_macro_f1;
        if (v >= target) return r.round;
    }
    return std::nullopt;
}

Simulation::Simulation(const FLRunConfig& cfg) : cfg_(cfg) {
    auto problems = validate_config(cfg_);
    if (!problems.empty()) throw ConfigError(std::move(problems));

    // dataset
    LabeledDataset source;
    if (cfg_.dataset.kind == "blobs") {
        Rng rng(stream("synth"));
        source = synth_blobs(cfg_.dataset.num_classes, cfg_.dataset.input_dim,
                             cfg_.dataset.n_per_class, cfg_.dataset.spread, rng);
    } else {
        source = load_idx(cfg_.dataset.images_path, cfg_.dataset.labels_path);
    }
    if (cfg_.dataset.bits_per_sample > 0) source.bits_per_sample = cfg_.dataset.bits_per_sample;

    spec_ = ModelSpec{source.input_dim, cfg_.model_hidden_dim, source.num_labels()};
    spec_.validate();

    // server validation split, never partitioned to clients
    {
        std::vector<int> order(static_cast<std::size_t>(source.size()));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(stream("valsplit"));
        rng.shuffle(order);
        int val_n = std::max(1, static_cast<int>(std::lround(cfg_.validation_fraction * source.size())));
        std::vector<int> val_idx(order.begin(), order.begin() + val_n);
        std::vector<int> train_idx(order.begin() + val_n, order.end());
        std::sort(val_idx.begin(), val_idx.end());
        std::sort(train_idx.begin(), train_idx.end());
        validation_ = source.subset(val_idx);
        source = source.subset(train_idx);
    }

    // partition over the training pool
    {
        Rng rng(stream("partition"));
        const auto& pc = cfg_.partition;
        if (pc.scheme == "hetero_dirichlet") {
            plan_ = partition_hetero_dirichlet(source, cfg_.num_clients, pc.alpha, pc.min_size, rng);
        } else if (pc.scheme == "shards") {
            plan_ = partition_shards(source, cfg_.num_clients, pc.shards_per_client);
        } else if (pc.scheme == "noniid_label") {
            plan_ = partition_noniid_label(source, cfg_.num_clients, pc.labels_per_client,
                                           pc.size_jitter, rng);
        } else {
            plan_ = label_skew_partition(source, cfg_.num_clients, pc.labels_per_client);
        }
        plan_.seed = derive_seed(cfg_.seed, "partition");
        client_data_.reserve(static_cast<std::size_t>(cfg_.num_clients));
        for (const auto& idx : plan_.assignments) client_data_.push_back(source.subset(idx));
    }

    // hardware assignment: round-robin over the configured pools
    {
        HardwareCatalog catalog = cfg_.hardware.catalog ? catalog_from_json(*cfg_.hardware.catalog)
                                                        : builtin_hardware_catalog();
        std::vector<int> spec_pool = cfg_.hardware.spec_pool;
        if (spec_pool.empty()) {
            spec_pool.resize(catalog.specs.size());
            std::iota(spec_pool.begin(), spec_pool.end(), 1);
        }
        for (int s : spec_pool) {
            if (s < 1 || s > static_cast<int>(catalog.specs.size())) {
                throw std::invalid_argument("hardware.spec_pool index " + std::to_string(s) +
                                            " out of catalog range");
            }
        }
        auto find_protocol = [&catalog](const std::string& name) {
            for (const auto& p : catalog.protocols) {
                if (p.name == name) return p;
            }
            throw std::invalid_argument("unknown protocol '" + name + "'");
        };
        std::vector<TransferProtocol> proto_pool;
        if (cfg_.hardware.protocol_pool.empty()) {
            proto_pool = catalog.protocols;
        } else {
            for (const auto& name : cfg_.hardware.protocol_pool) proto_pool.push_back(find_protocol(name));
        }

        for (int k = 0; k < cfg_.num_clients; ++k) {
            ClientSystemProfile prof;
            prof.hardware = catalog.specs[static_cast<std::size_t>(
                spec_pool[static_cast<std::size_t>(k) % spec_pool.size()] - 1)];
            prof.protocol = proto_pool[static_cast<std::size_t>(k) % proto_pool.size()];
            prof.cycles_per_bit = cfg_.hardware.cycles_per_bit;
            prof.freq_stdev_frac = cfg_.hardware.freq_stdev_frac;
            prof.bw_stdev_frac = cfg_.hardware.bw_stdev_frac;
            auto ov = cfg_.hardware.overrides.find(k);
            if (ov != cfg_.hardware.overrides.end()) {
                if (ov->second.spec_index) {
                    int s = *ov->second.spec_index;
                    if (s < 1 || s > static_cast<int>(catalog.specs.size())) {
                        throw std::invalid_argument("hardware override spec " + std::to_string(s) +
                                                    " out of catalog range");
                    }
                    prof.hardware = catalog.specs[static_cast<std::size_t>(s - 1)];
                }
                if (ov->second.protocol) prof.protocol = find_protocol(*ov->second.protocol);
                if (ov->second.cycles_per_bit) prof.cycles_per_bit = *ov->second.cycles_per_bit;
            }
            profiles_.push_back(std::move(prof));
        }

        norm_stats_.n_min = 1e300;
        norm_stats_.n_max = -1e300;
        for (const auto& d : client_data_) {
            norm_stats_.n_min = std::min(norm_stats_.n_min, static_cast<double>(d.size()));
            norm_stats_.n_max = std::max(norm_stats_.n_max, static_cast<double>(d.size()));
        }
        norm_stats_.cores_min = 1e300;
        norm_stats_.cores_max = -1e300;
        norm_stats_.freq_min = 1e300;
        norm_stats_.freq_max = -1e300;
        for (const auto& s : catalog.specs) {
            norm_stats_.cores_min = std::min(norm_stats_.cores_min, static_cast<double>(s.cores));
            norm_stats_.cores_max = std::max(norm_stats_.cores_max, static_cast<double>(s.cores));
            norm_stats_.freq_min = std::min(norm_stats_.freq_min, s.cpu_freq_mhz);
            norm_stats_.freq_max = std::max(norm_stats_.freq_max, s.cpu_freq_mhz);
        }
        norm_stats_.bw_min = 1e300;
        norm_stats_.bw_max = -1e300;
        for (const auto& p : catalog.protocols) {
            norm_stats_.bw_min = std::min(norm_stats_.bw_min, p.bandwidth_mbps);
            norm_stats_.bw_max = std::max(norm_stats_.bw_max, p.bandwidth_mbps);
        }
    }

    model_bits_ = static_cast<double>(model_size_bits(spec_, cfg_.hardware.bits_per_param));
    schedule_.eps_init = cfg_.agent.epsilon_init;
    schedule_.eps_end = cfg_.agent.epsilon_end;
    schedule_.decay_rounds = cfg_.agent.decay_rounds > 0 ? cfg_.agent.decay_rounds : cfg_.total_rounds;
    target_state_mode_ =
        cfg_.agent.target_state == "current" ? TargetState::Current : TargetState::Next;

    // global init and ledger
    {
        Rng rng(stream("init"));
        global_ = init_params(spec_, rng);
    }
    ledger_ = ReputationLedger(cfg_.num_clients, cfg_.score.base.psi_init);
    prev_performance_ = 0.0;

    // FlashRL: warm-up PCA fit, Q networks, replay memory. Last-known client
    // weights start at the broadcast init; the warm-up models are only used
    // to fit the projector.
    if (cfg_.policy == PolicyKind::FlashRL) {
        last_known_.assign(static_cast<std::size_t>(cfg_.num_clients), global_);
        std::vector<ParamVector> rows;
        rows.reserve(static_cast<std::size_t>(cfg_.num_clients));
        for (int k = 0; k < cfg_.num_clients; ++k) {
            OptimizerState opt{{}, cfg_.learning_rate, cfg_.momentum};
            Rng rng(stream("warmup", static_cast<std::uint64_t>(k)));
            auto res = local_train(global_, spec_, client_data_[static_cast<std::size_t>(k)], 1,
                                   cfg_.local_batch_size, std::move(opt), rng);
            rows.push_back(std::move(res.params));
        }
        int k_eff = std::min({cfg_.agent.k_pca, cfg_.num_clients - 1, spec_.param_count()});
        projector_ = fit_pca(rows, k_eff, derive_seed(cfg_.seed, "pca"));

        int state_len = cfg_.num_clients * (projector_.k_pca + 4);
        Rng rng(stream("qinit"));
        main_net_ = QNetwork::init(state_len, cfg_.agent.hidden_dim, cfg_.num_clients, rng);
        target_net_ = main_net_;
        buffer_ = std::make_unique<ReplayBuffer>(static_cast<std::size_t>(cfg_.agent.buffer_capacity));
    }
}

Rng Simulation::stream(std::string_view tag, std::uint64_t client, std::uint64_t round) const {
    return Rng(derive_seed(cfg_.seed, tag, client, round));
}

int Simulation::client_data_count(int k) const {
    return client_data_[static_cast<std::size_t>(k)].size();
}

std::vector<std::vector<int>> Simulation::partition_histogram() const {
    std::vector<std::vector<int>> hist;
    hist.reserve(client_data_.size());
    for (const auto& ds : client_data_) {
        std::vector<int> counts(static_cast<std::size_t>(spec_.num_classes), 0);
        for (int l : ds.labels) ++counts[static_cast<std::size_t>(l)];
        hist.push_back(std::move(counts));
    }
    return hist;
}

std::vector<RoundConditions> Simulation::conditions_for_round(int t) {
    for (const auto& [round, conds] : conditions_cache_) {
        if (round == t) return conds;
    }
    std::vector<RoundConditions> conds;
    conds.reserve(static_cast<std::size_t>(cfg_.num_clients));
    for (int k = 0; k < cfg_.num_clients; ++k) {
        Rng rng(stream("conditions", static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(t)));
        conds.push_back(sample_round_conditions(profiles_[static_cast<std::size_t>(k)], rng));
    }
    if (conditions_cache_.size() >= 2) conditions_cache_.erase(conditions_cache_.begin());
    conditions_cache_.emplace_back(t, conds);
    return conds;
}

AgentState Simulation::encode_for_round(int t) {
    auto conds = conditions_for_round(t);
    std::vector<ClientStateInput> inputs(static_cast<std::size_t>(cfg_.num_clients));
    for (int k = 0; k < cfg_.num_clients; ++k) {
        auto& in = inputs[static_cast<std::size_t>(k)];
        in.weights = &last_known_[static_cast<std::size_t>(k)];
        in.data_count = static_cast<double>(client_data_count(k));
        in.cores = static_cast<double>(profiles_[static_cast<std::size_t>(k)].hardware.cores);
        in.freq_mhz = conds[static_cast<std::size_t>(k)].freq_mhz;
        in.bandwidth_mbps = conds[static_cast<std::size_t>(k)].bandwidth_mbps;
    }
    return encode_state(inputs, projector_, norm_stats_);
}

AgentState Simulation::state_for_round(int t) {
    if (cfg_.policy != PolicyKind::FlashRL) {
        throw std::logic_error("state_for_round: agent state exists only under the flash-rl policy");
    }
    return encode_for_round(t);
}

std::vector<int> Simulation::select_clients(int t, const AgentState& state, double eps) {
    switch (cfg_.policy) {
        case PolicyKind::FullParticipation: {
            std::vector<int> all(static_cast<std::size_t>(cfg_.num_clients));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        case PolicyKind::Random: {
            Rng rng(stream("select", 0, static_cast<std::uint64_t>(t)));
            return rng.sample_without_replacement(cfg_.num_clients, cfg_.clients_per_round);
        }
        case PolicyKind::FlashRL: {
            auto q = q_forward(main_net_, state);
            Rng rng(stream("select", 0, static_cast<std::uint64_t>(t)));
            return select_top_u(q, cfg_.clients_per_round, eps, rng);
        }
    }
    throw std::logic_error("select_clients: unreachable");
}

RoundRecord Simulation::run_round(int t) {
    if (t != next_round_) {
        throw std::logic_error("run_round: rounds must execute in order (expected " +
                               std::to_string(next_round_) + ", got " + std::to_string(t) + ")");
    }
    const bool rl = cfg_.policy == PolicyKind::FlashRL;

    // agent state and this round's selection
    AgentState state;
    double eps = 0.0;
    if (rl) {
        state = encode_for_round(t);
        eps = epsilon_at(schedule_, t);
    }
    auto selected = select_clients(t, state, eps);
    auto conds = conditions_for_round(t);

    // local training and latency of every selected client
    std::vector<ParamVector> trained;
    std::vector<long long> sizes;
    std::vector<double> latencies;
    trained.reserve(selected.size());
    for (int k : selected) {
        const auto& data = client_data_[static_cast<std::size_t>(k)];
        OptimizerState opt{{}, cfg_.learning_rate, cfg_.momentum};
        Rng rng(stream("train", static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(t)));
        auto res = local_train(global_, spec_, data, cfg_.local_epochs, cfg_.local_batch_size,
                               std::move(opt), rng);
        if (rl) last_known_[static_cast<std::size_t>(k)] = res.params;
        trained.push_back(std::move(res.params));
        sizes.push_back(data.size());
        double data_bits = static_cast<double>(data.size()) * static_cast<double>(data.bits_per_sample);
        latencies.push_back(client_latency(profiles_[static_cast<std::size_t>(k)],
                                           conds[static_cast<std::size_t>(k)], data_bits,
                                           model_bits_));
    }

    // aggregation
    global_ = aggregate_fedavg(trained, sizes);
    if (!all_finite(global_)) {
        throw std::runtime_error("run_round: non-finite global weights after aggregation at round " +
                                 std::to_string(t + 1));
    }

    // evaluation and scoring
    Metrics metrics = evaluate(global_, spec_, validation_);
    double performance = cfg_.score.metric == PerformanceMetric::Accuracy ? metrics.accuracy
                                                                          : metrics.macro_f1;
    bool improved = performance > prev_performance_;
    auto lat_norm = minmax_normalize(latencies);
    std::vector<double> rewards(selected.size());
    RoundScoring scoring;
    scoring.round = t + 1;
    scoring.improved = improved;
    scoring.selected = selected;
    scoring.latencies_normalized = lat_norm;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        if (cfg_.score.mode == ScoreMode::Utility) {
            double d = divergence(trained[i], global_, cfg_.score.divergence_eps);
            double zeta = utility(d, improved);
            scoring.divergences.push_back(d);
            scoring.utilities.push_back(zeta);
            rewards[i] = reputation_update(ledger_, selected[i], zeta, lat_norm[i], cfg_.score.base);
        } else {
            Metrics local = evaluate(trained[i], spec_, validation_);
            double local_perf = cfg_.score.metric == PerformanceMetric::Accuracy ? local.accuracy
                                                                                 : local.macro_f1;
            rewards[i] = reputation_update_accuracy(ledger_, selected[i], local_perf,
                                                    prev_performance_, cfg_.score.base.lambda);
        }
    }
    prev_performance_ = performance;
    if (scoring_observer_) scoring_observer_(scoring);

    double round_latency = *std::max_element(latencies.begin(), latencies.end());
    cumulative_latency_ += round_latency;

    RoundRecord rec;
    rec.round = t + 1;
    rec.selected = selected;
    rec.global_accuracy = metrics.accuracy;
    rec.global_macro_f1 = metrics.macro_f1;
    rec.round_latency_s = round_latency;
    rec.cumulative_latency_s = cumulative_latency_;
    rec.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                      static_cast<double>(rewards.size());

    // store the transition, then one replay-driven DDQL update and target sync
    if (rl) {
        bool done = t + 1 == cfg_.total_rounds;
        Transition tr;
        tr.state = state;
        tr.actions = selected;
        tr.rewards = rewards;
        tr.done = done;
        tr.next_state = done ? state : encode_for_round(t + 1);
        buffer_->push(std::move(tr));

        Rng rng(stream("replay", 0, static_cast<std::uint64_t>(t)));
        auto batch = buffer_->sample(static_cast<std::size_t>(cfg_.agent.rl_batch_size), rng);
        rec.agent_loss = ddql_update(main_net_, target_net_, batch, cfg_.agent.gamma,
                                     cfg_.agent.rl_learning_rate, target_state_mode_);
        ++update_steps_;
        sync_target(main_net_, target_net_, update_steps_, cfg_.agent.sync_period);
        rec.epsilon = eps;
    }

    records_.push_back(rec);
    ++next_round_;
    return rec;
}

std::vector<RoundRecord> Simulation::run_all() {
    for (int t = next_round_; t < cfg_.total_rounds; ++t) run_round(t);
    return records_;
}

nlohmann::json Simulation::agent_checkpoint() const {
    if (cfg_.policy != PolicyKind::FlashRL) return nullptr;
    // Field order is part of the checkpoint contract.
    nlohmann::ordered_json j;
    j["main"] = qnetwork_to_json(main_net_);
    j["target"] = qnetwork_to_json(target_net_);
    j["step_counter"] = update_steps_;
    j["epsilon"] = {{"init", schedule_.eps_init},
                    {"end", schedule_.eps_end},
                    {"decay_rounds", schedule_.decay_rounds},
                    {"round", next_round_}};
    j["projector"] = projector_to_json(projector_);
    return j;
}

nlohmann::json Simulation::checkpoint(int completed_rounds) const {
    nlohmann::ordered_json j;
    j["round"] = completed_rounds;
    j["global_params"] = global_;
    j["ledger"] = ledger_.snapshot();
    j["agent"] = agent_checkpoint();
    return j;
}

std::string metrics_csv_header() {
    return "round,selected,global_accuracy,global_macro_f1,round_latency_s,"
           "cumulative_latency_s,mean_reward,agent_loss,epsilon";
}

std::string metrics_to_csv(const std::vector<RoundRecord>& records) {
    std::ostringstream os;
    os << metrics_csv_header() << '\n';
    for (const auto& r : records) {
        os << r.round << ',' << join_ids(r.selected) << ',' << fmt_double(r.global_accuracy) << ','
           << fmt_double(r.global_macro_f1) << ',' << fmt_double(r.round_latency_s) << ','
           << fmt_double(r.cumulative_latency_s) << ',' << fmt_double(r.mean_reward) << ','
           << (r.agent_loss ? fmt_double(*r.agent_loss) : "") << ','
           << (r.epsilon ? fmt_double(*r.epsilon) : "") << '\n';
    }
    return os.str();
}

std::vector<RoundRecord> metrics_from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty metrics file: " + path);
    if (line != metrics_csv_header()) {
        throw std::runtime_error("metrics schema mismatch in " + path + ": got '" + line + "'");
    }
    std::vector<RoundRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 9) {
            throw std::runtime_error("bad metrics row in " + path + ": '" + line + "'");
        }
        RoundRecord r;
        r.round = std::stoi(f[0]);
        r.selected = split_ids(f[1]);
        r.global_accuracy = std::stod(f[2]);
        r.global_macro_f1 = std::stod(f[3]);
        r.round_latency_s = std::stod(f[4]);
        r.cumulative_latency_s = std::stod(f[5]);
        r.mean_reward = std::stod(f[6]);
        if (!f[7].empty()) r.agent_loss = std::stod(f[7]);
        if (!f[8].empty()) r.epsilon = std::stod(f[8]);
        records.push_back(std::move(r));
    }
    return records;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.good()) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

std::vector<RoundRecord> run_simulation(const FLRunConfig& cfg) {
    auto started = std::chrono::system_clock::now();
    auto t0 = std::chrono::steady_clock::now();

    Simulation sim(cfg);
    const std::string& dir = cfg.out_dir;

    std::vector<RoundRecord> records;
    for (int t = 0; t < cfg.total_rounds; ++t) {
        records.push_back(sim.run_round(t));
        if (!dir.empty() && cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_round_%05d.json", t + 1);
            write_text_atomic(dir + "/" + name, sim.checkpoint(t + 1).dump(2) + "\n");
        }
    }

    if (!dir.empty()) {
        if (cfg.total_rounds > 0) {
            write_text_atomic(dir + "/metrics.csv", metrics_to_csv(records));
            write_text_atomic(dir + "/checkpoint_final.json",
                              sim.checkpoint(cfg.total_rounds).dump(2) + "\n");
        }
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto stamp = std::chrono::duration_cast<std::chrono::seconds>(started.time_since_epoch());
        nlohmann::ordered_json manifest;
        manifest["version"] = kVersionString;
        manifest["seed"] = cfg.seed;
        manifest["config"] = cfg.to_json();
        manifest["defaulted_fields"] = cfg.defaulted;
        manifest["outputs"] = {{"metrics", cfg.total_rounds > 0 ? "metrics.csv" : ""},
                               {"final_checkpoint", cfg.total_rounds > 0 ? "checkpoint_final.json" : ""}};
        manifest["rounds_completed"] = cfg.total_rounds;
        manifest["wall_time_s"] = wall;
        manifest["started_unix_s"] = stamp.count();
        write_text_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
    }
    return records;
}

}  // namespace flsim
