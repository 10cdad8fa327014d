#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "redmotion/harness.hpp"
#include "redmotion/log.hpp"
#include "redmotion/training.hpp"
#include "tiny.hpp"

using namespace redmotion;

TEST_CASE("cosine schedule hits both endpoints exactly")
{
    CHECK(cosine_lr(0, 100, 1e-3, 1e-6) == 1e-3);
    CHECK(cosine_lr(100, 100, 1e-3, 1e-6) == 1e-6);
    CHECK(cosine_lr(50, 100, 1e-3, 1e-6) == doctest::Approx((1e-3 + 1e-6) / 2.0));
    const double expected = 1e-6 + (1e-3 - 1e-6) * (1.0 + std::cos(std::numbers::pi * 0.3)) / 2.0;
    CHECK(cosine_lr(30, 100, 1e-3, 1e-6) == doctest::Approx(expected).epsilon(1e-12));
    for (std::size_t s = 1; s <= 100; ++s) CHECK(cosine_lr(s, 100, 1e-3, 1e-6) <= cosine_lr(s - 1, 100, 1e-3, 1e-6));
    CHECK(cosine_lr(0, 0, 1e-3, 1e-6) == 1e-3);
}

TEST_CASE("AdamW matches a hand-written update")
{
    nn::ParameterStore store(0);
    const auto w = store.add("w", 1, 2, nn::Init::zeros);
    store.value(w).data = {1.0, -2.0};
    const AdamWConfig cfg{0.9, 0.999, 1e-8, 0.1};
    AdamW opt(store, cfg);
    const std::vector<std::vector<double>> grads{{0.5, -1.0}, {0.2, 0.3}};
    std::vector<double> x{1.0, -2.0}, m(2, 0.0), v(2, 0.0);
    const double lr = 0.01;
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const std::vector<nn::Tensor> g{nn::Tensor(1, 2, grads[t - 1])};
        opt.step(store, g, lr);
        for (std::size_t i = 0; i < 2; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * grads[t - 1][i];
            v[i] = 0.999 * v[i] + 0.001 * grads[t - 1][i] * grads[t - 1][i];
            const double mh = m[i] / (1.0 - std::pow(0.9, double(t)));
            const double vh = v[i] / (1.0 - std::pow(0.999, double(t)));
            x[i] -= lr * (mh / (std::sqrt(vh) + 1e-8) + 0.1 * x[i]);
        }
        CHECK(store.value(w).data[0] == doctest::Approx(x[0]).epsilon(1e-12));
        CHECK(store.value(w).data[1] == doctest::Approx(x[1]).epsilon(1e-12));
    }
    CHECK(opt.steps_taken() == 2);

    // An empty gradient leaves the tensor untouched, weight decay included.
    const auto before = store.value(w);
    const std::vector<nn::Tensor> none{nn::Tensor{}};
    opt.step(store, none, lr);
    CHECK(store.value(w) == before);
}

TEST_CASE("parallel_for visits each index once and rethrows the first failure")
{
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_WITH(parallel_for(10, 3,
                                   [](std::size_t i) {
                                       if (i == 3 || i == 7) throw std::runtime_error("index " + std::to_string(i));
                                   }),
                      "index 3");
}

TEST_CASE("bounded queue hands over items in order and closes")
{
    BoundedQueue<int> q(2);
    std::thread producer([&] {
        for (int i = 0; i < 50; ++i) q.push(i);
        q.close();
    });
    int expected = 0;
    while (auto v = q.pop()) CHECK(*v == expected++);
    producer.join();
    CHECK(expected == 50);
    CHECK_FALSE(q.push(1));
}

TEST_CASE("run configuration keys and validation")
{
    RunConfig c;
    for (const auto& key : run_config_keys()) CHECK_FALSE(key.empty());
    apply_run_option(c, "mode", "pretrain_rbt");
    apply_run_option(c, "model", "dual_motion_vit");
    apply_run_option(c, "projector", "32,64,128");
    apply_run_option(c, "horizons", "10,20");
    apply_run_option(c, "aux_beta", "0.5");
    CHECK(c.mode == RunMode::pretrain_rbt);
    CHECK(c.model == ModelKind::dual_motion_vit);
    CHECK(c.model_config.projector == std::array<std::size_t, 3>{32, 64, 128});
    CHECK(c.horizons == std::vector<std::size_t>{10, 20});
    CHECK(c.loss.aux_beta == 0.5);
    CHECK(is_pretrain(c.mode));
    CHECK_THROWS(apply_run_option(c, "batch_size", "many"));
    CHECK_THROWS(apply_run_option(c, "unknown", "1"));
    c.fds = 0.0;
    CHECK_THROWS(c.validate());
    for (auto m : {RunMode::pretrain_rbt, RunMode::pretrain_simclr, RunMode::pretrain_tmcl, RunMode::pretrain_mcl_tmcl,
                   RunMode::finetune, RunMode::joint_rbt_aux, RunMode::eval})
        CHECK(parse_run_mode(to_string(m)) == m);
}

TEST_CASE("labeled subsets and samples")
{
    const auto scenes = rmtest::tiny_scenes(16, 3);
    const auto half = labeled_subset(scenes, 0.5, 1);
    CHECK(half.size() == 8);
    CHECK(labeled_subset(scenes, 0.5, 1) == half);
    const auto samples = labeled_samples(scenes, 10);
    std::size_t agents = 0;
    for (const auto& s : scenes) agents += s.tracks.size();
    CHECK(samples.size() <= agents);
    CHECK(samples.size() >= scenes.size());
    for (const auto& s : samples) REQUIRE(s.truth.has_value());
    CHECK(ego_samples(scenes, 10).size() == scenes.size());
}

TEST_CASE("training runs are reproducible")
{
    const Datasets data{rmtest::tiny_scenes(12, 1), rmtest::tiny_scenes(4, 2)};
    auto cfg = rmtest::tiny_run(RunMode::finetune);
    const RunResult a = run_finetune(cfg, data);
    const RunResult b = run_finetune(cfg, data);
    CHECK(a.parameter_digest == b.parameter_digest);
    CHECK(a.log.to_jsonl(false) == b.log.to_jsonl(false));
    CHECK(a.log.records().size() == cfg.steps);
    REQUIRE(a.final_train_nll.has_value());
    REQUIRE(a.final_val_nll.has_value());

    cfg.threads = 1;
    CHECK(run_finetune(cfg, data).parameter_digest == a.parameter_digest);
    cfg.seed = 1;
    CHECK(run_finetune(cfg, data).parameter_digest != a.parameter_digest);
}

TEST_CASE("joint training with zero auxiliary weight equals fine-tuning")
{
    const Datasets data{rmtest::tiny_scenes(12, 4), rmtest::tiny_scenes(4, 5)};
    auto cfg = rmtest::tiny_run(RunMode::finetune);
    const RunResult ft = run_finetune(cfg, data);
    cfg.mode = RunMode::joint_rbt_aux;
    cfg.loss.aux_beta = 0.0;
    const RunResult joint = run_joint_aux(cfg, data);
    CHECK(*joint.final_train_nll == *ft.final_train_nll);
    CHECK(*joint.final_val_nll == *ft.final_val_nll);
    for (std::size_t i = 0; i < ft.log.records().size(); ++i)
        CHECK(*joint.log.records()[i].nll == ft.log.records()[i].loss);
}

TEST_CASE("every pre-training objective runs for the models that support it")
{
    Datasets data{rmtest::tiny_scenes(8, 6), rmtest::tiny_scenes(4, 7)};
    for (auto mode : {RunMode::pretrain_rbt, RunMode::pretrain_simclr}) {
        for (auto model : {ModelKind::redmotion, ModelKind::motion_vit, ModelKind::dual_motion_vit}) {
            auto cfg = rmtest::tiny_run(mode, model);
            cfg.steps = 2;
            cfg.strip_agents = true;
            CAPTURE(to_string(mode));
            CAPTURE(to_string(model));
            const auto r = run_pretrain(cfg, data);
            CHECK(r.log.records().size() == 2);
            CHECK(std::isfinite(r.log.records().back().loss));
        }
    }
    for (auto mode : {RunMode::pretrain_tmcl, RunMode::pretrain_mcl_tmcl}) {
        auto cfg = rmtest::tiny_run(mode);
        cfg.steps = 2;
        cfg.strip_agents = true;
        CHECK(std::isfinite(run_pretrain(cfg, data).log.records().back().loss));
        cfg.model = ModelKind::motion_vit;
        CHECK_THROWS_AS(run_pretrain(cfg, data), std::invalid_argument);
    }
}

TEST_CASE("map pre-training rejects scenes with agents unless asked to strip them")
{
    Datasets data{rmtest::tiny_scenes(8, 6), rmtest::tiny_scenes(4, 7)};
    auto cfg = rmtest::tiny_run(RunMode::pretrain_rbt);
    cfg.steps = 1;
    CHECK_THROWS_AS(run_pretrain(cfg, data), std::invalid_argument);
}

TEST_CASE("twin objectives fail loudly with a batch of one")
{
    Datasets data{rmtest::tiny_scenes(8, 6), rmtest::tiny_scenes(4, 7)};
    auto cfg = rmtest::tiny_run(RunMode::pretrain_rbt);
    cfg.strip_agents = true;
    cfg.batch_size = 1;
    CHECK_THROWS_AS(run_pretrain(cfg, data), std::invalid_argument);
    cfg.mode = RunMode::joint_rbt_aux;
    cfg.strip_agents = false;
    CHECK_THROWS_AS(run_joint_aux(cfg, data), std::invalid_argument);
}

TEST_CASE("pre-trained encoder weights transfer into fine-tuning")
{
    Datasets data{rmtest::tiny_scenes(8, 8), rmtest::tiny_scenes(4, 9)};
    auto cfg = rmtest::tiny_run(RunMode::pretrain_rbt);
    cfg.strip_agents = true;
    cfg.steps = 2;
    const RunResult pre = run_pretrain(cfg, data);
    cfg.mode = RunMode::finetune;
    cfg.strip_agents = false;
    const RunResult ft = run_finetune(cfg, data, &pre.checkpoint);
    CHECK_FALSE(ft.init_loaded.empty());
    for (const auto& name : ft.init_loaded) CHECK(name.rfind("red_encoder/", 0) == 0);
}

TEST_CASE("evaluation checks the checkpoint digest and scores every labeled agent")
{
    Datasets data{rmtest::tiny_scenes(8, 10), rmtest::tiny_scenes(5, 11)};
    auto cfg = rmtest::tiny_run(RunMode::finetune);
    const RunResult r = run_finetune(cfg, data);
    cfg.mode = RunMode::eval;
    const EvalOutput out = run_eval(cfg, r.checkpoint, data.holdout);
    CHECK(out.predictions.size() == labeled_samples(data.holdout, 10).size());
    CHECK(out.report.horizons == cfg.horizons);
    CHECK(out.report.overall.count == out.predictions.size());
    REQUIRE(out.report.overall.avg_min_fde.has_value());

    auto other = cfg;
    other.model_config.descriptors = 6;
    CHECK_THROWS_AS(run_eval(other, r.checkpoint, data.holdout), std::invalid_argument);
    other = cfg;
    other.model = ModelKind::motion_vit;
    CHECK_THROWS_AS(run_eval(other, r.checkpoint, data.holdout), std::invalid_argument);
}

TEST_CASE("raster baselines train end to end")
{
    Datasets data{rmtest::tiny_scenes(6, 12), rmtest::tiny_scenes(3, 13)};
    for (auto model : {ModelKind::motion_vit, ModelKind::dual_motion_vit}) {
        auto cfg = rmtest::tiny_run(RunMode::joint_rbt_aux, model);
        cfg.steps = 2;
        const auto r = run_joint_aux(cfg, data);
        CHECK(r.log.records().back().bt.has_value());
        CHECK(std::isfinite(*r.final_val_nll));
    }
}

TEST_CASE("training log is append-only")
{
    TrainingLog log;
    log.append({0, 1.0});
    log.append({1, 0.5});
    CHECK_THROWS(log.append({1, 0.4}));
    const auto text = log.to_jsonl(false);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.find("time_ms") == std::string::npos);
}

TEST_CASE("twin pre-training lowers its loss on map-only scenes")
{
    Datasets data{rmtest::tiny_scenes(64, 20), rmtest::tiny_scenes(4, 21)};
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        auto cfg = rmtest::tiny_run(RunMode::pretrain_rbt);
        cfg.strip_agents = true;
        cfg.steps = 200;
        cfg.batch_size = 8;
        cfg.validate_every = 0;
        cfg.seed = seed;
        const auto r = run_pretrain(cfg, data);
        // Compare short averages of the noisy per-batch loss.
        double first = 0.0, last = 0.0;
        for (std::size_t i = 0; i < 10; ++i) {
            first += r.log.records()[i].loss;
            last += r.log.records()[r.log.records().size() - 1 - i].loss;
        }
        CAPTURE(seed);
        CHECK(last < first);
    }
}

TEST_CASE("evaluation scores an exact predictor at zero and a frozen one above zero")
{
    const auto scenes = rmtest::tiny_scenes(6, 30);
    const auto samples = labeled_samples(scenes, 10);
    std::vector<PredictionRecord> exact, frozen;
    for (const auto& s : samples) {
        MotionPrediction p(10);
        for (std::size_t t = 0; t < 10; ++t) p.at(0, t) = s.truth->positions[t];
        exact.push_back({s.scene_id, s.agent_id, s.kind, p});
        frozen.push_back({s.scene_id, s.agent_id, s.kind, MotionPrediction(10)});
    }
    const std::vector<std::size_t> h{5, 10};
    const auto a = evaluate_predictions(exact, samples, h);
    CHECK(*a.report.overall.avg_min_ade == 0.0);
    CHECK(*a.report.overall.avg_min_fde == 0.0);
    const auto b = evaluate_predictions(frozen, samples, h);
    CHECK(*b.report.overall.avg_min_ade > 0.0);
    CHECK(*b.report.overall.avg_min_fde > 0.0);
}
