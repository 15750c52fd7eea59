#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlva/backbone.hpp"
#include "nlva/eval.hpp"
#include "nlva/flops.hpp"
#include "nlva/fpl.hpp"
#include "nlva/run_config.hpp"
#include "nlva/tensor_io.hpp"

namespace {

struct FlopsArgs {
	std::string config;
	std::string format = "table";
};

struct ForwardArgs {
	std::string config;
	std::string input;
	std::string out;
	std::uint64_t synthetic_seed = 0;
	bool synthetic_given = false;
};

struct EvalArgs {
	std::string query;
	std::string gallery;
	bool no_cam_filter = false;
};

struct BenchArgs {
	std::string config;
	std::size_t repeat = 3;
};

int run_flops(const FlopsArgs& a) {
	const nlva::RunConfig rc = nlva::load_run_config(a.config);
	const nlva::CostReport rep = nlva::flops_model(rc.backbone);
	std::cout << (a.format == "json" ? nlva::render_cost_json(rep) + "\n" : nlva::render_cost_table(rep));
	return 0;
}

// One synthetic track: T frames of seeded Gaussian noise.
nlva::Tensor synthetic_track(const nlva::BackboneConfig& cfg, nlva::Rng& rng) {
	nlva::Tensor frames({cfg.frames, 3, cfg.input_hw[0], cfg.input_hw[1]});
	for (std::size_t i = 0; i < frames.size(); ++i) frames.data()[i] = rng.normal();
	return frames;
}

int run_forward(const ForwardArgs& a) {
	const nlva::RunConfig rc = nlva::load_run_config(a.config);
	const std::string out_path = !a.out.empty() ? a.out : rc.out;
	const std::string input_path = !a.input.empty() ? a.input : rc.input;
	if (out_path.empty()) throw nlva::config_error("forward: no output path (--out or config 'out')");
	if (a.synthetic_given && !input_path.empty())
		throw nlva::config_error("forward: --synthetic conflicts with an input file");

	// tracks to embed, with id/camera labels for the embedding file
	std::vector<nlva::Tensor> tracks;
	std::vector<int> ids, cams;
	if (!input_path.empty()) {
		nlva::Tensor in = nlva::read_nvt1(input_path);
		if (in.ndim() == 4) {
			tracks.push_back(std::move(in));
		} else if (in.ndim() == 5) {
			const std::size_t r = in.dim(0), chunk = in.size() / r;
			for (std::size_t i = 0; i < r; ++i) {
				nlva::Tensor one({in.dim(1), in.dim(2), in.dim(3), in.dim(4)});
				std::copy_n(in.data() + i * chunk, chunk, one.data());
				tracks.push_back(std::move(one));
			}
		} else {
			throw nlva::dim_error("forward: input must be T x 3 x H x W or R x T x 3 x H x W, got " +
			                      nlva::shape_str(in.shape()));
		}
		for (std::size_t i = 0; i < tracks.size(); ++i) {
			ids.push_back(static_cast<int>(i));
			cams.push_back(0);
		}
	} else {
		// synthetic data seed is decoupled from the weight seed
		nlva::Rng rng(a.synthetic_given ? a.synthetic_seed : rc.seed + 0x9e3779b9U);
		for (std::size_t i = 0; i < rc.tracks; ++i) {
			tracks.push_back(synthetic_track(rc.backbone, rng));
			ids.push_back(static_cast<int>(i / 2));
			cams.push_back(static_cast<int>(i % 2));
		}
	}
	if (tracks.empty()) throw nlva::config_error("forward: no tracks to embed");
	for (const nlva::Tensor& t : tracks)
		if (!nlva::all_finite(t)) throw nlva::numeric_error("forward: non-finite input frames");

	const nlva::Model model = nlva::build_model(rc.backbone, rc.seed);
	nlva::EmbeddingSet set;
	std::vector<nlva::Tensor> features;
	for (const nlva::Tensor& frames : tracks) {
		const nlva::Tensor video = nlva::forward_video(model, frames);
		nlva::BnParams bn = nlva::make_identity_bn(video.dim(0));
		features.push_back(nlva::fpl_forward(video, nlva::variant_fpl_kind(rc.backbone.variant), bn).post_bn);
	}
	const std::size_t d = features.front().size();
	set.vectors = nlva::Tensor({features.size(), d});
	for (std::size_t i = 0; i < features.size(); ++i)
		std::copy_n(features[i].data(), d, set.vectors.data() + i * d);
	set.ids = std::move(ids);
	set.cameras = std::move(cams);
	nlva::write_embedding_set(out_path, set);
	std::cout << "wrote " << features.size() << " embeddings of dim " << d << " to " << out_path << "\n";
	return 0;
}

int run_eval(const EvalArgs& a) {
	const nlva::EmbeddingSet q = nlva::read_embedding_set(a.query);
	const nlva::EmbeddingSet g = nlva::read_embedding_set(a.gallery);
	const nlva::Tensor dist = nlva::pairwise_distances(q, g);
	const bool filter = !a.no_cam_filter;
	nlva::EvalDiagnostics diag;
	const double r1 = nlva::cmc_rank1(dist, q.ids, g.ids, q.cameras, g.cameras, filter, &diag);
	const double map = nlva::mean_average_precision(dist, q.ids, g.ids, q.cameras, g.cameras, filter);
	std::printf("R1=%.4f, mAP=%.4f\n", r1, map);
	std::printf("evaluated=%zu skipped=%zu\n", diag.evaluated_queries, diag.skipped_queries);
	return 0;
}

int run_bench(const BenchArgs& a) {
	if (a.repeat < 1) throw nlva::config_error("bench: --repeat must be >= 1");
	const nlva::RunConfig rc = nlva::load_run_config(a.config);

	struct Row {
		nlva::Variant variant;
		double median_ms = 0.0;
		std::uint64_t flops = 0;
	};
	std::vector<Row> rows;
	for (nlva::Variant v : nlva::all_variants()) {
		nlva::BackboneConfig cfg = rc.backbone;
		cfg.variant = v;
		const nlva::Model model = nlva::build_model(cfg, rc.seed);
		nlva::Rng rng(rc.seed + 0x9e3779b9U);
		const nlva::Tensor frames = synthetic_track(cfg, rng);
		std::vector<double> ms(a.repeat);
		for (std::size_t r = 0; r < a.repeat; ++r) {
			const auto t0 = std::chrono::steady_clock::now();
			const nlva::Tensor video = nlva::forward_video(model, frames);
			const auto t1 = std::chrono::steady_clock::now();
			(void)video;
			ms[r] = std::chrono::duration<double, std::milli>(t1 - t0).count();
		}
		std::sort(ms.begin(), ms.end());
		const double median = ms.size() % 2 ? ms[ms.size() / 2] : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
		rows.push_back({v, median, nlva::flops_model(cfg).total});
	}

	for (const Row& r : rows)
		std::printf("%-14s median_ms=%.2f analytic_flops=%llu\n", nlva::variant_name(r.variant), r.median_ms,
		            static_cast<unsigned long long>(r.flops));
	std::vector<Row> by_time = rows;
	std::stable_sort(by_time.begin(), by_time.end(), [](const Row& x, const Row& y) { return x.median_ms < y.median_ms; });
	std::string ordering;
	for (const Row& r : by_time) {
		if (!ordering.empty()) ordering += " < ";
		ordering += nlva::variant_name(r.variant);
	}
	std::printf("ordering: %s\n", ordering.c_str());
	return 0;
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"non-local video attention kernels: cost reports, forwards, retrieval metrics"};
	app.require_subcommand(1);

	FlopsArgs fa;
	CLI::App* flops = app.add_subcommand("flops", "print the analytic FLOP report for the configured variant");
	flops->add_option("config", fa.config, "run config (JSON)")->required();
	flops->add_option("--format", fa.format, "output format")->check(CLI::IsMember({"table", "json"}));

	ForwardArgs wa;
	CLI::App* forward = app.add_subcommand("forward", "embed tracks and write an embedding set file");
	forward->add_option("config", wa.config, "run config (JSON)")->required();
	forward->add_option("--input", wa.input, "NVT1 frame file (T x 3 x H x W, or R x T x 3 x H x W)");
	forward->add_option("--out", wa.out, "embedding output path");
	forward->add_option("--synthetic", wa.synthetic_seed, "generate seeded synthetic tracks instead of reading input");

	EvalArgs ea;
	CLI::App* eval = app.add_subcommand("eval", "compute R1 and mAP between two embedding set files");
	eval->add_option("--query", ea.query, "query embedding set")->required();
	eval->add_option("--gallery", ea.gallery, "gallery embedding set")->required();
	eval->add_flag("--no-cam-filter", ea.no_cam_filter, "disable the cross-camera filtering protocol");

	BenchArgs ba;
	CLI::App* bench = app.add_subcommand("bench", "time one forward per variant and report medians");
	bench->add_option("config", ba.config, "run config (JSON)")->required();
	bench->add_option("--repeat", ba.repeat, "timed forwards per variant");

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e);
		return code == 0 ? 0 : 2;
	}

	wa.synthetic_given = forward->count("--synthetic") > 0;

	try {
		if (flops->parsed()) return run_flops(fa);
		if (forward->parsed()) return run_forward(wa);
		if (eval->parsed()) return run_eval(ea);
		return run_bench(ba);
	} catch (const nlva::numeric_error& e) {
		std::cerr << "numeric error: " << e.what() << "\n";
		return 3;
	} catch (const nlva::error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	}
}
