// Acceptance gate: runs every release criterion once and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nlva/backbone.hpp"
#include "nlva/eval.hpp"
#include "nlva/flops.hpp"
#include "nlva/losses.hpp"
#include "nlva/nonlocal.hpp"
#include "nlva/rng.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using nlva::BackboneConfig;
using nlva::NonLocalParams;
using nlva::Tensor;
using nlva::Variant;

namespace {

double ms_since(Clock::time_point t0) {
	return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
	char buf[512];
	va_list args;
	va_start(args, pattern);
	std::vsnprintf(buf, sizeof buf, pattern, args);
	va_end(args);
	return buf;
}

BackboneConfig full_width_config(Variant v) {
	BackboneConfig cfg; // defaults: full width, 8 frames, 256x128, 16 stripes
	cfg.variant = v;
	return cfg;
}

NonLocalParams random_params(std::size_t c_in, std::size_t c_embed, nlva::Rng& rng) {
	NonLocalParams p = nlva::make_nonlocal_params(c_in, c_embed, rng);
	for (std::size_t i = 0; i < p.out_w.size(); ++i) p.out_w.data()[i] = rng.uniform(-0.5, 0.5);
	return p;
}

Tensor random_tensor(std::vector<std::size_t> shape, nlva::Rng& rng) {
	Tensor t(std::move(shape));
	for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
	return t;
}

// --- criterion 1: analytic cost totals ------------------------------------

bool cost_totals(std::string& note) {
	const auto t0 = Clock::now();
	const struct {
		Variant v;
		double center_g;
	} rows[] = {
	    {Variant::baseline, 30.4}, {Variant::nvan, 60.0},     {Variant::nvan_spatial, 30.4},
	    {Variant::nvan_temporal, 40.4}, {Variant::ste_nvan, 16.5},
	};
	bool ok = true;
	std::string got;
	for (const auto& row : rows) {
		const double g = static_cast<double>(nlva::flops_model(full_width_config(row.v)).total) / 1e9;
		ok = ok && g >= row.center_g * 0.9 && g <= row.center_g * 1.1;
		got += (got.empty() ? "" : "/") + fmt("%.1f", g);
	}
	const double ms = ms_since(t0);
	ok = ok && ms < 1000.0;
	note = got + fmt("G vs 30.4/60.0/30.4/40.4/16.5G +-10%%, %.0f ms", ms);
	return ok;
}

// --- criterion 2: cost ratios ----------------------------------------------

bool cost_ratios(std::string& note) {
	const double base = static_cast<double>(nlva::flops_model(full_width_config(Variant::baseline)).total);
	const double dense = static_cast<double>(nlva::flops_model(full_width_config(Variant::nvan)).total);
	const double reduced = static_cast<double>(nlva::flops_model(full_width_config(Variant::ste_nvan)).total);
	const double r1 = reduced / dense, r2 = reduced / base, r3 = dense / base;
	note = fmt("%.3f vs 0.273 +-0.05, %.3f vs 0.543 +-0.05, %.2f vs 1.97 +-0.15", r1, r2, r3);
	return std::abs(r1 - 0.273) <= 0.05 && std::abs(r2 - 0.543) <= 0.05 && std::abs(r3 - 1.97) <= 0.15;
}

// --- criterion 3: dense attention vs brute-force oracle ---------------------

bool attention_oracle(std::string& note) {
	nlva::Rng rng(1001);
	double worst = 0.0;
	for (int trial = 0; trial < 100; ++trial) {
		const std::size_t c = 1 + rng.uniform_int(4);
		const std::size_t ce = 1 + rng.uniform_int(c);
		const std::size_t t = 1 + rng.uniform_int(3), h = 1 + rng.uniform_int(2), w = 1 + rng.uniform_int(2);
		const NonLocalParams p = random_params(c, ce, rng);
		const Tensor x = random_tensor({c, t, h, w}, rng);
		const Tensor z = nlva::nonlocal_forward(x, p).z;
		const Tensor want = oracles::nonlocal_positionwise(x, p);
		for (std::size_t i = 0; i < z.size(); ++i) worst = std::max(worst, std::abs(z.data()[i] - want.data()[i]));
	}
	note = fmt("100 instances, max |diff| = %.2e (tol 1e-10)", worst);
	return worst < 1e-10;
}

// --- criterion 4: invariant suite -------------------------------------------

bool invariant_suite(std::string& note) {
	const auto t0 = Clock::now();
	nlva::Rng rng(1002);
	bool ok = true;

	// attention rows are probability distributions
	for (int trial = 0; trial < 100 && ok; ++trial) {
		const std::size_t c = 1 + rng.uniform_int(4), ce = 1 + rng.uniform_int(c);
		const std::size_t t = 1 + rng.uniform_int(3), h = 1 + rng.uniform_int(2), w = 1 + rng.uniform_int(2);
		const Tensor attn = nlva::nonlocal_forward(random_tensor({c, t, h, w}, rng), random_params(c, ce, rng))
		                        .cache.attn;
		for (std::size_t i = 0; i < attn.dim(0) && ok; ++i) {
			double sum = 0.0;
			for (std::size_t j = 0; j < attn.dim(1); ++j) {
				ok = ok && attn.at(i, j) >= 0.0;
				sum += attn.at(i, j);
			}
			ok = ok && std::abs(sum - 1.0) <= 1e-9;
		}
	}
	if (!ok) note = "attention rows are not stochastic";

	// permuting the positions permutes the output the same way
	for (int trial = 0; trial < 100 && ok; ++trial) {
		const std::size_t c = 1 + rng.uniform_int(4), ce = 1 + rng.uniform_int(c);
		const std::size_t t = 1 + rng.uniform_int(3), h = 1 + rng.uniform_int(2), w = 1 + rng.uniform_int(2);
		const std::size_t n = t * h * w;
		const NonLocalParams p = random_params(c, ce, rng);
		const Tensor x = random_tensor({c, t, h, w}, rng);
		std::vector<std::size_t> perm(n);
		std::iota(perm.begin(), perm.end(), 0);
		for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);

		const Tensor x_pos = nlva::positions_from_video(x);
		Tensor x2_pos({n, c});
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t ch = 0; ch < c; ++ch) x2_pos.at(i, ch) = x_pos.at(perm[i], ch);
		const Tensor z1 = nlva::positions_from_video(nlva::nonlocal_forward(x, p).z);
		const Tensor z2 = nlva::positions_from_video(
		    nlva::nonlocal_forward(nlva::video_from_positions(x2_pos, c, t, h, w), p).z);
		for (std::size_t i = 0; i < n && ok; ++i)
			for (std::size_t ch = 0; ch < c; ++ch)
				ok = ok && std::abs(z2.at(i, ch) - z1.at(perm[i], ch)) <= 1e-10;
	}
	if (!ok && note.empty()) note = "attention is not permutation-equivariant";

	// zero output projection leaves the residual path untouched, bitwise
	for (int trial = 0; trial < 100 && ok; ++trial) {
		const std::size_t c = 1 + rng.uniform_int(4), ce = 1 + rng.uniform_int(c);
		NonLocalParams p = random_params(c, ce, rng);
		p.out_w = Tensor({c, ce});
		const Tensor x = random_tensor({c, 2, 2, 1 + rng.uniform_int(2)}, rng);
		const Tensor z = nlva::nonlocal_forward(x, p).z;
		for (std::size_t i = 0; i < x.size() && ok; ++i) ok = ok && z.data()[i] == x.data()[i];
	}
	if (!ok && note.empty()) note = "zero output projection is not a bitwise residual identity";

	// with unit-width frames and one stripe per row, stripes change nothing
	for (int trial = 0; trial < 100 && ok; ++trial) {
		const std::size_t c = 1 + rng.uniform_int(4), ce = 1 + rng.uniform_int(c);
		const std::size_t t = 1 + rng.uniform_int(3), h = 1 + rng.uniform_int(4);
		const NonLocalParams p = random_params(c, ce, rng);
		const Tensor x = random_tensor({c, t, h, 1}, rng);
		const Tensor dense = nlva::nonlocal_forward(x, p).z;
		const Tensor striped = nlva::stripe_nonlocal_forward(x, p, nlva::StripeConfig{h});
		for (std::size_t i = 0; i < x.size() && ok; ++i)
			ok = ok && std::abs(dense.data()[i] - striped.data()[i]) <= 1e-10;
	}
	if (!ok && note.empty()) note = "stripe attention does not reduce to dense at S=H, W=1";

	const double ms = ms_since(t0);
	ok = ok && ms < 60000.0;
	if (ok) note = fmt("4 properties x 100 cases, %.0f ms (budget 60 s)", ms);
	return ok;
}

// --- criterion 5: gradient check ---------------------------------------------

double attention_loss(const Tensor& x, const NonLocalParams& p, const Tensor& cot) {
	const Tensor z = nlva::nonlocal_forward(x, p).z;
	double s = 0.0;
	for (std::size_t i = 0; i < z.size(); ++i) s += z.data()[i] * cot.data()[i];
	return s;
}

bool gradient_check(std::string& note) {
	nlva::Rng rng(1003);
	const double step = 1e-5;
	double worst = 0.0;
	for (int trial = 0; trial < 20; ++trial) {
		const std::size_t c = 3, ce = 2, t = 2, h = 1, w = 3;
		NonLocalParams p = random_params(c, ce, rng);
		Tensor x = random_tensor({c, t, h, w}, rng);
		const Tensor cot = random_tensor({c, t, h, w}, rng);

		const nlva::NonLocalResult res = nlva::nonlocal_forward(x, p);
		const nlva::NonLocalGrads g = nlva::nonlocal_backward(cot, res.cache, p);

		auto check = [&](Tensor& param, const Tensor& analytic) {
			for (std::size_t i = 0; i < param.size(); ++i) {
				const double keep = param.data()[i];
				param.data()[i] = keep + step;
				const double up = attention_loss(x, p, cot);
				param.data()[i] = keep - step;
				const double down = attention_loss(x, p, cot);
				param.data()[i] = keep;
				const double numeric = (up - down) / (2.0 * step);
				const double a = analytic.data()[i];
				worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric)));
			}
		};
		check(x, g.x);
		check(p.query_w, g.query_w);
		check(p.key_w, g.key_w);
		check(p.value_w, g.value_w);
		check(p.out_w, g.out_w);
	}
	note = fmt("20 instances, max rel err = %.2e (tol 1e-4)", worst);
	return worst < 1e-4;
}

// --- criterion 6: retrieval metric oracle ------------------------------------

bool metric_oracle(std::string& note) {
	nlva::Rng rng(1004);
	int exercised = 0;
	bool ok = true;
	for (int trial = 0; trial < 500 && exercised < 220; ++trial) {
		const std::size_t nq = 1 + rng.uniform_int(6), ng = 2 + rng.uniform_int(9);
		Tensor dist({nq, ng});
		for (std::size_t i = 0; i < dist.size(); ++i) dist.data()[i] = rng.uniform(0.0, 2.0);
		std::vector<int> q_ids(nq), q_cams(nq), g_ids(ng), g_cams(ng);
		for (auto& v : q_ids) v = static_cast<int>(rng.uniform_int(4));
		for (auto& v : q_cams) v = static_cast<int>(rng.uniform_int(3));
		for (auto& v : g_ids) v = static_cast<int>(rng.uniform_int(4));
		for (auto& v : g_cams) v = static_cast<int>(rng.uniform_int(3));
		for (const bool filter : {true, false}) {
			bool any = false;
			for (std::size_t i = 0; i < nq; ++i)
				any = any ||
				      oracles::query_outcome(dist, i, q_ids[i], q_cams[i], g_ids, g_cams, filter).has_match;
			if (!any) continue;
			++exercised;
			ok = ok && nlva::cmc_rank1(dist, q_ids, g_ids, q_cams, g_cams, filter) ==
			               oracles::rank1(dist, q_ids, g_ids, q_cams, g_cams, filter);
			ok = ok && nlva::mean_average_precision(dist, q_ids, g_ids, q_cams, g_cams, filter) ==
			               oracles::mean_ap(dist, q_ids, g_ids, q_cams, g_cams, filter);
		}
	}
	note = fmt("%d instances matched exactly (needed 200)", exercised);
	return ok && exercised >= 200;
}

// --- criterion 7: structural traces -------------------------------------------

bool structural_traces(std::string& note) {
	BackboneConfig cfg;
	cfg.variant = Variant::ste_nvan;
	cfg.width_multiplier = 1.0 / 32.0;
	cfg.frames = 8;
	cfg.input_hw = {64, 32};
	cfg.stripe_s = 4;
	const nlva::Model m = nlva::build_model(cfg, 41);
	nlva::Rng rng(42);
	const Tensor frames = random_tensor({8, 3, 64, 32}, rng);
	nlva::ForwardTrace trace;
	const Tensor out = nlva::forward_video(m, frames, &trace);

	const bool halving_ok = trace.temporal_sizes == std::vector<std::size_t>{8, 4, 2} && out.dim(1) == 2 &&
	                        trace.attention_layers == 5;

	BackboneConfig dense = cfg;
	dense.variant = Variant::nvan;
	const nlva::Model md = nlva::build_model(dense, 41);
	const std::vector<std::array<std::size_t, 3>> want{{3, 3, 1}, {3, 4, 2}, {4, 4, 3}, {4, 5, 4}, {4, 6, 5}};
	bool sites_ok = md.attention.size() == want.size();
	for (std::size_t i = 0; sites_ok && i < want.size(); ++i)
		sites_ok = md.attention[i].stage == want[i][0] && md.attention[i].block == want[i][1] &&
		           md.attention[i].ordinal == want[i][2];

	std::string sizes;
	for (std::size_t t : trace.temporal_sizes) sizes += (sizes.empty() ? "" : "->") + std::to_string(t);
	note = fmt("frame trace %s, output T'=%zu, %zu attention layers at the fixed sites", sizes.c_str(),
	           out.dim(1), md.attention.size());
	return halving_ok && sites_ok;
}

// --- criterion 8: loss checks ---------------------------------------------------

bool loss_checks(std::string& note) {
	const bool ce_exact = nlva::cross_entropy(Tensor({1, 5}), {0}) == std::log(5.0) &&
	                      nlva::cross_entropy(Tensor({1, 2}), {1}) == std::log(2.0);

	const nlva::LabeledBatch identical{Tensor::full({4, 3}, 0.25), {0, 0, 1, 1}};
	const double trip = nlva::batch_hard_triplet(identical);
	const bool trip_ok = std::abs(trip - std::log(2.0)) <= 1e-12;

	nlva::Rng rng(1005);
	double worst = 0.0;
	for (int trial = 0; trial < 25; ++trial) {
		const Tensor emb = random_tensor({8, 4}, rng);
		std::vector<int> labels(8);
		for (std::size_t i = 0; i < 8; ++i) labels[i] = static_cast<int>(i / 2);
		worst = std::max(worst, std::abs(nlva::batch_hard_triplet({emb, labels}) -
		                                 oracles::batch_hard_triplet(emb, labels)));
	}
	note = fmt("uniform NLL exact, identical-batch value ln 2 +-1e-12, oracle max |diff| = %.2e", worst);
	return ce_exact && trip_ok && worst <= 1e-10;
}

// --- criterion 9: end-to-end CLI smoke -------------------------------------------

bool end_to_end(std::string& note) {
	const fs::path dir = fs::temp_directory_path() / "nlva_acceptance";
	fs::remove_all(dir);
	fs::create_directories(dir);
	const std::string cfg = (dir / "config.json").string();
	{
		std::ofstream os(cfg);
		os << "{\"variant\":\"ste_nvan\",\"width_multiplier\":0.125,\"frames\":8,\"input_hw\":[256,128],"
		      "\"stripe_s\":16,\"tracks\":1,\"seed\":11}";
	}

	double slowest_ms = 0.0;
	std::string bytes[2];
	for (int run = 0; run < 2; ++run) {
		const std::string out = (dir / ("emb" + std::to_string(run) + ".bin")).string();
		const std::string capture = (dir / ("log" + std::to_string(run) + ".txt")).string();
		const std::string cmd =
		    std::string(NLVA_CLI_PATH) + " forward " + cfg + " --out " + out + " > " + capture + " 2>&1";
		const auto t0 = Clock::now();
		const int raw = std::system(cmd.c_str());
		slowest_ms = std::max(slowest_ms, ms_since(t0));
		if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) {
			note = "forward run " + std::to_string(run) + " failed";
			return false;
		}
		std::ifstream is(out, std::ios::binary);
		std::ostringstream ss;
		ss << is.rdbuf();
		bytes[run] = ss.str();
	}
	const bool deterministic = !bytes[0].empty() && bytes[0] == bytes[1];
	const bool fast = slowest_ms < 30000.0;
	note = fmt("two runs byte-identical (%zu bytes), slowest %.1f s (budget 30 s)", bytes[0].size(),
	           slowest_ms / 1000.0);
	fs::remove_all(dir);
	return deterministic && fast;
}

} // namespace

int main() {
	const struct {
		const char* label;
		bool (*run)(std::string&);
	} criteria[] = {
	    {"analytic cost totals stay inside the published bands", cost_totals},
	    {"cost ratios between variants match the published reductions", cost_ratios},
	    {"dense attention matches the position-by-position oracle", attention_oracle},
	    {"attention invariants hold (row sums, permutation, residual, stripe=dense)", invariant_suite},
	    {"analytic gradients match central finite differences", gradient_check},
	    {"retrieval metrics match their brute-force definitions", metric_oracle},
	    {"temporal reduction trace is 8->4->2 with five attention layers placed", structural_traces},
	    {"loss values match closed forms and the exhaustive oracle", loss_checks},
	    {"synthetic end-to-end forward is fast and byte-deterministic", end_to_end},
	};

	int failures = 0;
	for (std::size_t i = 0; i < std::size(criteria); ++i) {
		std::string note;
		bool ok = false;
		try {
			ok = criteria[i].run(note);
		} catch (const std::exception& e) {
			note = std::string("exception: ") + e.what();
		}
		if (!ok) ++failures;
		std::printf("%s  %zu. %s%s%s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].label,
		            note.empty() ? "" : " — ", note.c_str());
	}
	return failures == 0 ? 0 : 1;
}
