// End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
// process exits nonzero if any check fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "m2fn/common.hpp"
#include "m2fn/data/aggregate.hpp"
#include "m2fn/data/distribution_ops.hpp"
#include "m2fn/data/stats.hpp"
#include "m2fn/data/synthetic.hpp"
#include "m2fn/harness/dataset.hpp"
#include "m2fn/harness/gradcam.hpp"
#include "m2fn/harness/trainer.hpp"
#include "m2fn/metrics.hpp"
#include "m2fn/model/layers.hpp"
#include "m2fn/model/network.hpp"

using namespace m2fn;

namespace {

// ----------------------------------------------------------------- utilities

std::string g_scratch;

struct Failure {
    std::string detail;
};

void require(bool ok, const std::string& detail) {
    if (!ok) throw Failure{detail};
}

model::FeatureTensor random_tensor(int n, int c, int h, int w, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    model::FeatureTensor t(n, c, h, w);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = gauss(rng);
    return t;
}

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
    return m;
}

model::ModelConfig small_config() {
    model::ModelConfig c = model::ModelConfig::tiny();
    c.cbn_hidden = 8;
    c.att_hidden = 8;
    c.high_hidden = 8;
    c.head_hidden = 8;
    return c;
}

ScoreDistribution random_distribution(Rng& rng) {
    std::uniform_real_distribution<double> uni(0.05, 1.0);
    ScoreDistribution d;
    double s = 0;
    for (double& b : d.buckets) {
        b = uni(rng);
        s += b;
    }
    for (double& b : d.buckets) b /= s;
    return d;
}

// ------------------------------------------------- check 1: gradient checks

void check_loss_gradient(const std::function<double(const std::vector<double>&)>& loss,
                         const std::function<std::vector<double>(const std::vector<double>&)>& grad,
                         std::vector<double> x, const std::string& label) {
    const double h = 1e-6;
    std::vector<double> g = grad(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double lp = loss(x);
        x[i] = orig - h;
        const double lm = loss(x);
        x[i] = orig;
        const double fd = (lp - lm) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
        require(std::abs(fd - g[i]) / denom < 1e-4,
                label + ": analytic/finite-difference mismatch at entry " + std::to_string(i));
    }
}

double net_loss(model::M2FN& net, const model::FeatureTensor& x, const Eigen::MatrixXd& aux,
                const std::vector<double>& targets) {
    Eigen::MatrixXd out = net.forward(x, &aux, /*training=*/true, /*update_running=*/false);
    if (net.config().output_mode == model::OutputMode::kRegression) {
        std::vector<double> pred(targets.size()), w(targets.size(), 1.0);
        for (std::size_t i = 0; i < targets.size(); ++i) pred[i] = out(0, static_cast<Eigen::Index>(i));
        return metrics::loss_weighted_mse(pred, targets, w);
    }
    std::vector<ScoreDistribution> pred(static_cast<std::size_t>(out.cols())), tgt(pred.size());
    for (Eigen::Index n = 0; n < out.cols(); ++n)
        for (int k = 0; k < 10; ++k) {
            pred[static_cast<std::size_t>(n)].buckets[static_cast<std::size_t>(k)] = out(k, n);
            tgt[static_cast<std::size_t>(n)].buckets[static_cast<std::size_t>(k)] =
                (k == static_cast<int>(n) % 10) ? 0.55 : 0.05;
        }
    return metrics::loss_kld(pred, tgt);
}

void backprop_loss(model::M2FN& net, const model::FeatureTensor& x, const Eigen::MatrixXd& aux,
                   const std::vector<double>& targets) {
    Eigen::MatrixXd out = net.forward(x, &aux, true, false);
    net.zero_grad();
    if (net.config().output_mode == model::OutputMode::kRegression) {
        std::vector<double> pred(targets.size()), w(targets.size(), 1.0);
        for (std::size_t i = 0; i < targets.size(); ++i) pred[i] = out(0, static_cast<Eigen::Index>(i));
        auto g = metrics::grad_weighted_mse(pred, targets, w);
        Eigen::MatrixXd d(1, out.cols());
        for (std::size_t i = 0; i < g.size(); ++i) d(0, static_cast<Eigen::Index>(i)) = g[i];
        net.backward(d);
        return;
    }
    std::vector<ScoreDistribution> pred(static_cast<std::size_t>(out.cols())), tgt(pred.size());
    for (Eigen::Index n = 0; n < out.cols(); ++n)
        for (int k = 0; k < 10; ++k) {
            pred[static_cast<std::size_t>(n)].buckets[static_cast<std::size_t>(k)] = out(k, n);
            tgt[static_cast<std::size_t>(n)].buckets[static_cast<std::size_t>(k)] =
                (k == static_cast<int>(n) % 10) ? 0.55 : 0.05;
        }
    auto g = metrics::grad_kld(pred, tgt);
    Eigen::MatrixXd d(10, out.cols());
    for (Eigen::Index n = 0; n < out.cols(); ++n)
        for (int k = 0; k < 10; ++k)
            d(k, n) = g[static_cast<std::size_t>(n)].buckets[static_cast<std::size_t>(k)];
    net.backward(d);
}

void check_net_gradients(model::M2FN& net, const model::FeatureTensor& x, const Eigen::MatrixXd& aux,
                         const std::vector<double>& targets, int probes, const std::string& label) {
    backprop_loss(net, x, aux, targets);
    std::map<std::string, Eigen::MatrixXd> analytic;
    for (model::Param* p : net.params()) analytic[p->name] = p->grad;

    Rng rng(424242);
    const double h = 1e-5;
    for (model::Param* p : net.params()) {
        if (!p->trainable) continue;
        for (int probe = 0; probe < probes; ++probe) {
            const Eigen::Index i =
                static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p->value.rows()));
            const Eigen::Index j =
                static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p->value.cols()));
            const double orig = p->value(i, j);
            p->value(i, j) = orig + h;
            const double lp = net_loss(net, x, aux, targets);
            p->value(i, j) = orig - h;
            const double lm = net_loss(net, x, aux, targets);
            p->value(i, j) = orig;
            const double fd = (lp - lm) / (2 * h);
            const double an = analytic[p->name](i, j);
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            require(std::abs(fd - an) / denom < 1e-4, label + ": parameter " + p->name + " mismatch");
        }
    }
}

void run_gradient_checks() {
    Rng rng(101);
    // loss-level gradients on random inputs
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> target(12), weights(12), pred(12);
    for (std::size_t i = 0; i < 12; ++i) {
        target[i] = uni(rng);
        weights[i] = 0.5 + uni(rng);
        pred[i] = uni(rng);
    }
    check_loss_gradient(
        [&](const std::vector<double>& p) { return metrics::loss_weighted_mse(p, target, weights); },
        [&](const std::vector<double>& p) { return metrics::grad_weighted_mse(p, target, weights); }, pred,
        "weighted MSE");

    auto to_dists = [](const std::vector<double>& flat) {
        std::vector<ScoreDistribution> ds(flat.size() / 10);
        for (std::size_t n = 0; n < ds.size(); ++n)
            for (int k = 0; k < 10; ++k) ds[n].buckets[static_cast<std::size_t>(k)] = flat[10 * n + k];
        return ds;
    };
    auto from_dists = [](const std::vector<ScoreDistribution>& ds) {
        std::vector<double> flat(ds.size() * 10);
        for (std::size_t n = 0; n < ds.size(); ++n)
            for (int k = 0; k < 10; ++k) flat[10 * n + k] = ds[n].buckets[static_cast<std::size_t>(k)];
        return flat;
    };
    std::vector<ScoreDistribution> dtarget{random_distribution(rng), random_distribution(rng)};
    std::vector<ScoreDistribution> dpred{random_distribution(rng), random_distribution(rng)};
    check_loss_gradient(
        [&](const std::vector<double>& p) { return metrics::loss_kld(to_dists(p), dtarget); },
        [&](const std::vector<double>& p) { return from_dists(metrics::grad_kld(to_dists(p), dtarget)); },
        from_dists(dpred), "KL divergence");
    check_loss_gradient(
        [&](const std::vector<double>& p) { return metrics::loss_emd(to_dists(p), dtarget); },
        [&](const std::vector<double>& p) { return from_dists(metrics::grad_emd(to_dists(p), dtarget)); },
        from_dists(dpred), "CDF-distance loss");

    // full network gradients, both output modes
    {
        model::M2FN net(small_config(), 5, 321);
        Rng trng(15);
        model::FeatureTensor x = random_tensor(3, 3, 32, 32, trng);
        Eigen::MatrixXd aux = random_matrix(5, 3, trng);
        check_net_gradients(net, x, aux, {0.1, 0.5, 0.3}, 2, "regression network");
    }
    {
        model::ModelConfig c = small_config();
        c.output_mode = model::OutputMode::kDistribution;
        c.cbn_all_convs = true;
        model::M2FN net(c, 5, 654);
        Rng trng(16);
        model::FeatureTensor x = random_tensor(3, 3, 32, 32, trng);
        Eigen::MatrixXd aux = random_matrix(5, 3, trng);
        check_net_gradients(net, x, aux, {}, 2, "distribution network");
    }
}

// ------------------------------------------- check 2: normalization sweeps

void run_normalization_checks() {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        // attention weights over spatial locations
        Rng rng(seed);
        model::SpatialAttention att("att", 4, 3, 8, rng);
        model::FeatureTensor x = random_tensor(2, 4, 3, 3, rng);
        Eigen::MatrixXd aux = random_matrix(3, 2, rng);
        att.forward(x, aux);
        const Eigen::MatrixXd& alpha = att.attention_weights();
        for (Eigen::Index n = 0; n < alpha.cols(); ++n)
            require(std::abs(alpha.col(n).sum() - 1.0) < 1e-6,
                    "attention weights do not sum to 1 (seed " + std::to_string(seed) + ")");

        // distribution head output columns
        model::ModelConfig c = small_config();
        c.output_mode = model::OutputMode::kDistribution;
        model::M2FN net(c, 3, seed);
        model::FeatureTensor imgs = random_tensor(2, 3, 32, 32, rng);
        Eigen::MatrixXd naux = random_matrix(3, 2, rng);
        Eigen::MatrixXd out = net.forward(imgs, &naux, false);
        for (Eigen::Index n = 0; n < out.cols(); ++n)
            require(std::abs(out.col(n).sum() - 1.0) < 1e-6,
                    "distribution head does not sum to 1 (seed " + std::to_string(seed) + ")");

        // log-normal bucketization
        std::uniform_real_distribution<double> uni(0.001, 0.4);
        std::vector<double> ctrs(40);
        for (double& v : ctrs) v = uni(rng);
        data::BucketEdges edges = data::decile_edges(ctrs);
        std::uniform_int_distribution<std::uint64_t> impr(1, 2000);
        ScoreDistribution d = data::lognormal_distribution(uni(rng), impr(rng), edges);
        require(std::abs(d.sum() - 1.0) < 1e-6,
                "bucketized distribution does not sum to 1 (seed " + std::to_string(seed) + ")");
    }
}

// -------------------------------------------- check 3: oracle equivalences

double pearson_oracle(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> rank_oracle(const std::vector<double>& xs) {
    // O(n^2) counting ranks with tie midpoints
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        int less = 0, equal = 0;
        for (std::size_t j = 0; j < xs.size(); ++j) {
            if (xs[j] < xs[i]) ++less;
            if (xs[j] == xs[i]) ++equal;
        }
        ranks[i] = less + (equal + 1) / 2.0;
    }
    return ranks;
}

void run_oracle_checks() {
    Rng rng(303);
    std::uniform_int_distribution<int> nd(3, 30), vd(0, 6);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = nd(rng);
        std::vector<double> xs(static_cast<std::size_t>(n)), ys(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            xs[i] = vd(rng);  // few distinct values: heavy ties
            ys[i] = vd(rng) + 0.5 * vd(rng);
        }
        bool xs_const = true, ys_const = true;
        for (std::size_t i = 1; i < xs.size(); ++i) {
            xs_const = xs_const && xs[i] == xs[0];
            ys_const = ys_const && ys[i] == ys[0];
        }
        if (xs_const || ys_const) continue;
        require(std::abs(metrics::pearson(xs, ys) - pearson_oracle(xs, ys)) < 1e-9, "pearson oracle mismatch");
        require(std::abs(metrics::spearman(xs, ys) - pearson_oracle(rank_oracle(xs), rank_oracle(ys))) < 1e-9,
                "spearman oracle mismatch");
    }

    // KLD and CDF-distance against direct formula evaluation
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ScoreDistribution> pred{random_distribution(rng), random_distribution(rng)};
        std::vector<ScoreDistribution> tgt{random_distribution(rng), random_distribution(rng)};
        double kld = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            for (int k = 0; k < 10; ++k) {
                const double t = tgt[i].buckets[static_cast<std::size_t>(k)];
                if (t > 0) kld += t * std::log(t / std::max(pred[i].buckets[static_cast<std::size_t>(k)], 1e-12));
            }
        kld /= static_cast<double>(pred.size());
        require(std::abs(metrics::loss_kld(pred, tgt) - kld) < 1e-9, "KLD oracle mismatch");

        double emd = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            double cp = 0, ct = 0, acc = 0;
            for (int k = 0; k < 10; ++k) {
                cp += pred[i].buckets[static_cast<std::size_t>(k)];
                ct += tgt[i].buckets[static_cast<std::size_t>(k)];
                acc += std::pow(std::abs(cp - ct), 2.0) / 10.0;
            }
            emd += std::sqrt(acc);
        }
        emd /= static_cast<double>(pred.size());
        require(std::abs(metrics::loss_emd(pred, tgt) - emd) < 1e-9, "CDF-distance oracle mismatch");
    }

    // one-way ANOVA F against the textbook formula
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> ld(1, 3), sd(2, 8);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::vector<int> levels;
        std::vector<double> ctrs;
        for (int l = 1; l <= 3; ++l) {
            const int sz = sd(rng);
            for (int i = 0; i < sz; ++i) {
                levels.push_back(l);
                ctrs.push_back(uni(rng) + 0.1 * l);
            }
        }
        data::AnovaResult res = data::anova_screen(levels, ctrs);
        std::map<int, std::vector<double>> groups;
        for (std::size_t i = 0; i < levels.size(); ++i) groups[levels[i]].push_back(ctrs[i]);
        double grand = 0;
        for (double v : ctrs) grand += v;
        grand /= static_cast<double>(ctrs.size());
        double ssb = 0, ssw = 0;
        for (const auto& [lvl, vals] : groups) {
            double m = 0;
            for (double v : vals) m += v;
            m /= static_cast<double>(vals.size());
            ssb += static_cast<double>(vals.size()) * (m - grand) * (m - grand);
            for (double v : vals) ssw += (v - m) * (v - m);
        }
        const double k = static_cast<double>(groups.size()), n = static_cast<double>(ctrs.size());
        const double f = (ssb / (k - 1)) / (ssw / (n - k));
        require(std::abs(res.f_statistic - f) < 1e-9, "ANOVA F oracle mismatch");
    }

    // aggregation conserves click counts exactly
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<data::ClickLogRecord> recs;
    std::uint64_t total = 0;
    for (int img = 0; img < 9; ++img)
        for (int i = 0; i < 30 + img; ++i) {
            data::ClickLogRecord r;
            r.attrs.image_id = "img" + std::to_string(img);
            r.attrs.age = 1 + img % 9;
            r.clicked = coin(rng);
            total += static_cast<std::uint64_t>(r.clicked);
            recs.push_back(r);
        }
    auto agg = data::aggregate_logs(recs, 1);
    std::uint64_t out = 0;
    for (const auto& inst : agg.instances) {
        out += inst.clicks;
        require(std::llround(inst.ctr * static_cast<double>(inst.impressions)) ==
                    static_cast<long long>(inst.clicks),
                "rate does not reproduce the click count");
    }
    require(out == total, "aggregation lost clicks");
}

// ------------------------------------------------ check 4: reduction checks

void run_reduction_checks() {
    Rng rng(404);
    model::FeatureTensor x = random_tensor(3, 3, 32, 32, rng);
    Eigen::MatrixXd aux = random_matrix(4, 3, rng);

    // fresh conditional normalization (zero deltas) equals the plain variant
    {
        model::ModelConfig with = small_config();
        model::ModelConfig without = small_config();
        without.use_cbn = false;
        without.cbn_block_mask = {false, false, false, false, false};
        model::M2FN a(with, 4, 55), b(without, 4, 55);
        std::map<std::string, model::Param*> bp;
        for (model::Param* p : b.params()) bp[p->name] = p;
        for (model::Param* p : a.params())
            if (auto it = bp.find(p->name); it != bp.end()) it->second->value = p->value;
        Eigen::MatrixXd oa = a.forward(x, &aux, true, false);
        Eigen::MatrixXd ob = b.forward(x, &aux, true, false);
        require((oa - ob).cwiseAbs().maxCoeff() < 1e-6, "conditional normalization with zero deltas differs "
                                                        "from the plain variant");
    }

    // a zero auxiliary vector annihilates the fusion product exactly
    {
        Rng frng(77);
        model::HighLevelFusion fusion("fusion", 12, 4, 6, frng);
        Eigen::MatrixXd flat = random_matrix(12, 3, frng);
        Eigen::MatrixXd zaux = Eigen::MatrixXd::Zero(4, 3);
        Eigen::MatrixXd fused = fusion.forward(flat, zaux);
        require(fused.isZero(0.0), "fusion output is not exactly zero for a zero auxiliary branch");
    }

    // the all-off configuration is the pure image pipeline
    {
        model::ModelConfig off = small_config();
        off.use_aux = false;
        off.use_cbn = false;
        off.use_attention = false;
        off.use_high_fusion = false;
        off.cbn_block_mask = {false, false, false, false, false};
        model::M2FN net(off, 0, 66);
        for (model::Param* p : net.params())
            require(p->name.find("att") == std::string::npos && p->name.find("fusion") == std::string::npos &&
                        p->name.find("gamma_l") == std::string::npos &&
                        p->name.find("beta_l") == std::string::npos,
                    "all-off configuration still owns fusion parameters: " + p->name);
        Eigen::MatrixXd o = net.forward(x, nullptr, false);
        require(o.rows() == 1 && o.cols() == 3 && o.allFinite(), "pure image pipeline output malformed");
    }

    // every block mask preserves output shapes
    for (int mask = 0; mask < 32; ++mask) {
        model::ModelConfig c = small_config();
        for (int b = 0; b < 5; ++b) c.cbn_block_mask[static_cast<std::size_t>(b)] = (mask >> b) & 1;
        c.use_cbn = mask != 0;
        model::M2FN net(c, 4, 100 + static_cast<std::uint64_t>(mask));
        Eigen::MatrixXd o = net.forward(x, &aux, false);
        require(o.rows() == 1 && o.cols() == 3 && o.allFinite(),
                "block mask " + std::to_string(mask) + " broke the output shape");
    }
}

// ---------------------------------------- check 5: synthetic end-to-end run

harness::RunConfig e2e_config(const std::string& out_dir, std::uint64_t seed, bool image_only) {
    harness::RunConfig cfg;
    cfg.model = model::ModelConfig::tiny();
    cfg.model.cbn_hidden = 64;
    cfg.model.att_hidden = 64;
    cfg.model.high_hidden = 64;
    cfg.model.head_hidden = 128;
    if (image_only) {
        cfg.model.use_aux = false;
        cfg.model.use_cbn = false;
        cfg.model.use_attention = false;
        cfg.model.use_high_fusion = false;
        cfg.model.cbn_block_mask = {false, false, false, false, false};
    }
    cfg.learning_rate = 5e-4;
    cfg.batch_size = 128;
    cfg.epochs = 10;
    cfg.seed = seed;
    cfg.out_dir = out_dir;
    return cfg;
}

std::string run_end_to_end() {
    data::SyntheticOptions opts;
    auto synth = data::generate_synthetic_dataset(4242, 2000, data::PlantedEffects{}, opts);
    data::HashEmbedder emb(derive_seed(4242, "text-embedding"));
    harness::Dataset full = harness::build_dataset_from_synthetic(synth, 1, emb, model::OutputMode::kRegression);
    auto [test_set, train_set] = harness::split_dataset(full, 0.2);

    double full_sum = 0, image_sum = 0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        harness::RunConfig fc = e2e_config(g_scratch + "/e2e_full_" + std::to_string(seed), seed, false);
        harness::TrainResult fr = harness::train(fc, train_set);
        full_sum += harness::evaluate_checkpoint(fr.checkpoint_path, test_set).sprc_mean;

        harness::RunConfig ic = e2e_config(g_scratch + "/e2e_img_" + std::to_string(seed), seed, true);
        harness::TrainResult ir = harness::train(ic, train_set);
        image_sum += harness::evaluate_checkpoint(ir.checkpoint_path, test_set).sprc_mean;
    }
    const double full_mean = full_sum / 3.0, image_mean = image_sum / 3.0;
    std::ostringstream os;
    os << "full " << full_mean << ", image-only " << image_mean;
    require(full_mean >= 0.5, "full model rank correlation below 0.5: " + os.str());
    require(full_mean - image_mean >= 0.05, "full model does not beat image-only by 0.05: " + os.str());
    return os.str();
}

// ---------------------------- check 6: determinism and checkpoint round-trip

harness::Dataset small_synthetic(std::uint64_t seed, int n) {
    data::SyntheticOptions opts;
    opts.min_impressions = 20;
    opts.max_impressions = 40;
    auto synth = data::generate_synthetic_dataset(seed, n, data::PlantedEffects{}, opts);
    data::HashEmbedder emb(seed);
    return harness::build_dataset_from_synthetic(synth, 1, emb, model::OutputMode::kRegression);
}

std::string run_determinism_checks() {
    harness::Dataset ds = small_synthetic(606, 100);
    harness::RunConfig cfg;
    cfg.model = small_config();
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    cfg.seed = 7;

    cfg.out_dir = g_scratch + "/det_a";
    harness::TrainResult a = harness::train(cfg, ds);
    cfg.out_dir = g_scratch + "/det_b";
    harness::TrainResult b = harness::train(cfg, ds);
    for (std::size_t e = 0; e < a.epochs.size(); ++e) {
        require(a.epochs[e].train_loss == b.epochs[e].train_loss, "seeded reruns diverge in training loss");
        require(a.epochs[e].val_sprc == b.epochs[e].val_sprc, "seeded reruns diverge in validation metrics");
    }
    require(a.best_val_sprc == b.best_val_sprc, "seeded reruns diverge in the final metric");

    // save/load preserves evaluation
    auto net = model::load_checkpoint(a.checkpoint_path);
    metrics::MetricReport before = harness::evaluate_model(*net, ds);
    const std::string copy = g_scratch + "/det_a/resaved.bin";
    model::save_checkpoint(copy, *net);
    auto net2 = model::load_checkpoint(copy);
    metrics::MetricReport after = harness::evaluate_model(*net2, ds);
    require(std::abs(before.sprc_mean - after.sprc_mean) < 1e-6 &&
                std::abs(before.lcc_mean - after.lcc_mean) < 1e-6,
            "checkpoint round-trip changed evaluation metrics");
    return {};
}

// ---------------------------------------------- check 7: activation heatmaps

void run_heatmap_checks() {
    harness::Dataset ds = small_synthetic(707, 4);
    model::ModelConfig c = small_config();
    model::M2FN net(c, ds.aux_dim, 11);

    for (const char* layer : {"block1", "block3", "block5", "attention"}) {
        harness::Heatmap hm = harness::gradcam(net, ds.instances[0].image, &ds.instances[0].aux, layer);
        require(hm.values.minCoeff() >= 0.0 && hm.values.maxCoeff() <= 1.0,
                std::string("heatmap out of [0,1] at ") + layer);
    }

    // zero output weights: gradient is zero everywhere, so the map is zero
    {
        model::M2FN zeroed(c, ds.aux_dim, 12);
        for (model::Param* p : zeroed.params())
            if (p->name == "head.out.weight" || p->name == "head.out.bias") p->value.setZero();
        harness::Heatmap hm = harness::gradcam(zeroed, ds.instances[0].image, &ds.instances[0].aux, "block4");
        require(hm.values.isZero(0.0), "zero-gradient heatmap is not all zero");
    }

    // closed form: rectified channel-weighted activation sum, max-normalized
    {
        harness::Heatmap hm = harness::gradcam(net, ds.instances[1].image, &ds.instances[1].aux, "block2");
        const model::FeatureTensor& act = net.activation("block2");
        const model::FeatureTensor& grad = net.activation_grad("block2");
        Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(act.h, act.w);
        for (int ci = 0; ci < act.c; ++ci) {
            double w = 0;
            for (Eigen::Index i = 0; i < grad.plane_size(); ++i) w += grad.plane(0, ci)[i];
            w /= static_cast<double>(grad.plane_size());
            for (int y = 0; y < act.h; ++y)
                for (int xi = 0; xi < act.w; ++xi)
                    expected(y, xi) += w * act.plane(0, ci)[static_cast<Eigen::Index>(y) * act.w + xi];
        }
        expected = expected.cwiseMax(0.0);
        if (expected.maxCoeff() > 0) expected /= expected.maxCoeff();
        require((hm.values - expected).cwiseAbs().maxCoeff() < 1e-6, "heatmap deviates from the closed form");
    }
}

// --------------------------------------------------------------------- main

struct Check {
    std::string name;
    std::function<std::string()> run;  // returns optional detail for the PASS line
};

}  // namespace

int main() {
    g_scratch = (std::filesystem::temp_directory_path() / "m2fn_acceptance").string();
    std::filesystem::remove_all(g_scratch);
    std::filesystem::create_directories(g_scratch);

    const std::vector<Check> checks = {
        {"gradients match finite differences", [] { run_gradient_checks(); return std::string(); }},
        {"normalization invariants over 100 seeds", [] { run_normalization_checks(); return std::string(); }},
        {"metric and statistics oracles agree", [] { run_oracle_checks(); return std::string(); }},
        {"module reductions and mask sweep", [] { run_reduction_checks(); return std::string(); }},
        {"synthetic end-to-end learning", run_end_to_end},
        {"determinism and checkpoint round-trip",
         [] { return run_determinism_checks(); }},
        {"activation heatmaps", [] { run_heatmap_checks(); return std::string(); }},
    };

    int failures = 0;
    for (const auto& check : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = check.run();
        } catch (const Failure& f) {
            ok = false;
            detail = f.detail;
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("unexpected error: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream line;
        line << (ok ? "PASS" : "FAIL") << "  " << check.name;
        if (!detail.empty()) line << " (" << detail << ")";
        line << "  [" << std::fixed << std::setprecision(1) << secs << "s]";
        std::cout << line.str() << std::endl;
        if (!ok) ++failures;
    }
    std::filesystem::remove_all(g_scratch);
    return failures == 0 ? 0 : 1;
}
