// Command-line surface: synth / train / eval / recommend / gradcheck.
// Exit codes: 0 success, 1 usage error, 2 data or model error.

#include "truthsr/checkpoint.hpp"
#include "truthsr/config.hpp"
#include "truthsr/metrics.hpp"
#include "truthsr/synthetic.hpp"
#include "truthsr/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace truthsr;

namespace {

struct DataPaths {
  fs::path interactions;
  fs::path text;
  fs::path image;
};

// --data may be the .jsonl file itself or a directory holding the synth
// output tree; explicit embedding flags override the derived defaults.
DataPaths resolve_data_paths(const std::string& data, const std::string& text,
                             const std::string& image) {
  DataPaths p;
  fs::path base(data);
  if (fs::is_directory(base)) {
    p.interactions = base / "interactions.jsonl";
  } else {
    p.interactions = base;
    base = base.parent_path();
  }
  p.text = text.empty() ? base / "text_embeddings.tsrv" : fs::path(text);
  p.image = image.empty() ? base / "image_embeddings.tsrv" : fs::path(image);
  return p;
}

struct LoadedData {
  SplitDataset split;
  EmbeddingStore store;
};

LoadedData load_data(const DataPaths& paths, int k_core) {
  Dataset full = load_interactions(paths.interactions);
  if (k_core > 0) full = k_core_filter(full, k_core);
  LoadedData out{chronological_split(full), load_embedding_pair(paths.text, paths.image)};
  return out;
}

void print_config_header(const RunConfig& cfg) {
  std::cout << "# config " << run_config_to_json(cfg) << "\n";
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw DataError("failed writing: " + path.string());
}

// ---- synth ----

struct SynthArgs {
  std::uint64_t seed = 7;
  int users = 50;
  int items = 30;
  double pattern = 1.0;
  int dim = 64;
  double missing = 0.0;
  double noise = 0.6;
  int len_min = 8;
  int len_max = 15;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  nlohmann::json header{{"seed", a.seed},       {"users", a.users},   {"items", a.items},
                        {"pattern", a.pattern}, {"dim", a.dim},       {"missing", a.missing},
                        {"noise", a.noise},     {"len_min", a.len_min},
                        {"len_max", a.len_max}, {"out", a.out}};
  std::cout << "# config " << header.dump() << "\n";

  SynthOptions opt;
  opt.dim = a.dim;
  opt.missing_prob = a.missing;
  opt.noise = a.noise;
  opt.len_min = a.len_min;
  opt.len_max = a.len_max;
  const SyntheticData data = generate_synthetic(a.seed, a.users, a.items, a.pattern, opt);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_interactions(data.dataset, dir / "interactions.jsonl");
  write_embeddings(data.store, EmbeddingKind::Text, dir / "text_embeddings.tsrv");
  write_embeddings(data.store, EmbeddingKind::Image, dir / "image_embeddings.tsrv");

  nlohmann::json transitions;
  nlohmann::json next = nlohmann::json::object();
  for (std::size_t k = 0; k < data.item_names.size(); ++k) {
    next[data.item_names[k]] = data.item_names[static_cast<std::size_t>(data.next[k])];
  }
  transitions["next"] = std::move(next);
  write_text_file(dir / "transitions.json", transitions.dump(2) + "\n");

  std::cout << "wrote " << data.dataset.size() << " interactions, "
            << data.store.count(EmbeddingKind::Text) << " review vectors, "
            << data.store.count(EmbeddingKind::Image) << " image vectors to " << a.out << "\n";
  return 0;
}

// ---- train ----

int run_train(RunConfig cfg, int k_core) {
  const DataPaths paths = resolve_data_paths(cfg.data, cfg.text_embeddings, cfg.image_embeddings);
  LoadedData data = load_data(paths, k_core);

  cfg.train.model.item_count = data.split.item_count();
  // The frozen embedding files fix the content dimensions.
  cfg.train.model.d_t = data.store.text_dim();
  cfg.train.model.d_v = data.store.image_dim();
  cfg.validate();
  print_config_header(cfg);
  std::cout << "users " << data.split.users.size() << "  items " << data.split.item_count()
            << "  dropped_users " << data.split.dropped_users << "\n";

  const FitResult<float> result = fit<float>(data.split, data.store, cfg.train);
  std::cout << std::setprecision(6);
  for (const EpochLog& lg : result.log) {
    std::cout << "epoch " << lg.epoch << "  loss " << lg.train_loss;
    if (lg.evaluated) {
      std::cout << "  val_recall10 " << lg.val_recall10 << "  val_ndcg10 " << lg.val_ndcg10;
    }
    std::cout << "\n";
  }
  std::cout << "best epoch " << result.best_epoch << "  val_recall10 " << result.best_recall10
            << "\n";

  if (cfg.out.empty()) throw DataError("train: --out checkpoint path is required");
  save_checkpoint(result.params, data.split.item_names, cfg.out);
  std::cout << "saved checkpoint to " << cfg.out << "\n";
  return 0;
}

// ---- eval / recommend ----

void require_matching_vocab(const Checkpoint& ck, const SplitDataset& split) {
  if (ck.item_names != split.item_names) {
    throw ModelError("checkpoint item vocabulary does not match the dataset");
  }
}

int run_eval(RunConfig cfg, int k_core, const std::string& split_name) {
  if (cfg.checkpoint.empty()) throw DataError("eval: --model is required");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  cfg.train.model = ck.params.cfg;
  const DataPaths paths = resolve_data_paths(cfg.data, cfg.text_embeddings, cfg.image_embeddings);
  LoadedData data = load_data(paths, k_core);
  require_matching_vocab(ck, data.split);
  cfg.validate();
  print_config_header(cfg);

  const ReviewBankIndex banks(data.split, data.store);
  std::vector<Sample> samples;
  if (split_name == "train") {
    samples = make_train_samples(data.split, ck.params.cfg.max_len);
  } else if (split_name == "val") {
    samples = make_val_samples(data.split, ck.params.cfg.max_len);
  } else if (split_name == "test") {
    samples = make_test_samples(data.split, ck.params.cfg.max_len);
  } else {
    throw DataError("eval: unknown split \"" + split_name + "\" (expected train|val|test)");
  }

  const MetricsReport rep = evaluate(ck.params, data.split, data.store, banks,
                                     std::span<const Sample>(samples),
                                     std::span<const int>(cfg.ks), cfg.mask_history);
  const auto buckets = uncertainty_report(rep.uncertainties, rep.hits10, cfg.buckets);
  const std::string doc = metrics_to_json(rep, buckets);
  if (cfg.out.empty()) {
    std::cout << doc;
  } else {
    write_text_file(cfg.out, doc);
    std::cout << "wrote metrics to " << cfg.out << "\n";
  }
  return 0;
}

int run_recommend(RunConfig cfg, int k_core, const std::string& user, int top_k) {
  if (cfg.checkpoint.empty()) throw DataError("recommend: --model is required");
  check_data(top_k >= 1, "recommend: --top-k must be >= 1");
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  cfg.train.model = ck.params.cfg;
  const DataPaths paths = resolve_data_paths(cfg.data, cfg.text_embeddings, cfg.image_embeddings);

  Dataset full = load_interactions(paths.interactions);
  if (k_core > 0) full = k_core_filter(full, k_core);
  const EmbeddingStore store =
      load_embedding_pair(paths.text, paths.image);
  const SplitDataset split = chronological_split(full);
  require_matching_vocab(ck, split);
  cfg.validate();
  print_config_header(cfg);

  // Context: the user's complete history in the raw data, most recent last.
  const auto& positions = full.user_positions(user);
  Sample s;
  s.user = &user;
  for (std::size_t pos : positions) s.context.push_back(&full.interactions()[pos]);
  const int max_len = ck.params.cfg.max_len;
  if (static_cast<int>(s.context.size()) > max_len) {
    s.context.erase(s.context.begin(),
                    s.context.end() - static_cast<std::ptrdiff_t>(max_len));
  }

  const ReviewBankIndex banks(split, store);
  const FeatureBundle<float> f = build_features<float>(s, split, store, banks, ck.params.cfg);
  const RankingResult r = full_rank_sample(ck.params, f, cfg.mask_history);

  std::cout << std::setprecision(6) << "user " << user << "  uncertainty " << r.uncertainty
            << "\n";
  for (int i = 0; i < top_k && i < static_cast<int>(r.order.size()); ++i) {
    const int item = r.order[static_cast<std::size_t>(i)];
    std::cout << std::setw(3) << i + 1 << ". " << split.item_names[static_cast<std::size_t>(item)]
              << "  belief " << r.belief[item] << "  p " << r.expected_prob[item] << "\n";
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed) {
  nlohmann::json header{{"seed", seed}};
  std::cout << "# config " << header.dump() << "\n";
  const GradCheckReport report = grad_check(seed);
  std::cout << format_report(report);
  return report.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"truthsr: multi-view sequential recommender with evidential uncertainty"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a planted-pattern dataset with embeddings");
  synth->add_option("--seed", synth_args.seed, "RNG seed");
  synth->add_option("--users", synth_args.users, "number of users");
  synth->add_option("--items", synth_args.items, "number of items");
  synth->add_option("--pattern", synth_args.pattern, "next-item pattern strength in [0,1]");
  synth->add_option("--dim", synth_args.dim, "embedding dimension");
  synth->add_option("--missing", synth_args.missing, "probability a position lacks review/image");
  synth->add_option("--noise", synth_args.noise, "embedding jitter scale");
  synth->add_option("--len-min", synth_args.len_min, "minimum sequence length");
  synth->add_option("--len-max", synth_args.len_max, "maximum sequence length");
  synth->add_option("--out", synth_args.out, "output directory")->required();

  std::string config_path, data, text_emb, image_emb, out, model_path;
  std::string views = "both", head = "evidential", split_name = "test", user;
  bool no_coattention = false, mask_history = false;
  int k_core = 0, epochs = 0, batch_size = 0, eval_every = 0, d_h = 0, d_i = 0, d_m = 0;
  int layers = 0, buckets = 0, top_k = 10;
  double lr = 0, lambda = -1;
  std::uint64_t seed = 0;
  std::vector<int> ks;

  auto add_common = [&](CLI::App* cmd, bool needs_data) {
    cmd->add_option("--config", config_path, "run-config JSON file");
    auto* d = cmd->add_option("--data", data, "interactions .jsonl or synth output directory");
    if (needs_data) d->required();
    cmd->add_option("--text-embeddings", text_emb, "review embedding file (.tsrv)");
    cmd->add_option("--image-embeddings", image_emb, "image embedding file (.tsrv)");
    cmd->add_option("--k-core", k_core, "apply iterated k-core filtering (0 = off)");
  };

  auto* train = app.add_subcommand("train", "Train a model and save a checkpoint");
  add_common(train, true);
  train->add_option("--out", out, "checkpoint output path")->required();
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--lr", lr, "learning rate");
  train->add_option("--batch-size", batch_size, "batch size");
  train->add_option("--eval-every", eval_every, "validate every N epochs");
  train->add_option("--seed", seed, "RNG seed");
  train->add_option("--lambda", lambda, "evidential loss weight");
  train->add_option("--d-h", d_h, "GRU hidden size");
  train->add_option("--d-i", d_i, "item embedding size");
  train->add_option("--d-m", d_m, "fused multimodal input size");
  train->add_option("--layers", layers, "GRU layers per view");
  train->add_option("--views", views, "views feeding the joint opinion: id|mm|both");
  train->add_flag("--no-coattention", no_coattention, "feed raw review vectors, skip re-modeling");
  train->add_option("--head", head, "output head: evidential|softmax");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with full ranking");
  add_common(eval, true);
  eval->add_option("--model", model_path, "checkpoint path")->required();
  eval->add_option("--k", ks, "ranking cutoffs")->delimiter(',');
  eval->add_flag("--mask-history", mask_history, "rank already-seen items last");
  eval->add_option("--split", split_name, "train|val|test");
  eval->add_option("--buckets", buckets, "uncertainty buckets");
  eval->add_option("--out", out, "metrics JSON output path (default: stdout)");

  auto* rec = app.add_subcommand("recommend", "Rank items for one user");
  add_common(rec, true);
  rec->add_option("--model", model_path, "checkpoint path")->required();
  rec->add_option("--user", user, "user id")->required();
  rec->add_option("--top-k", top_k, "list length");
  rec->add_flag("--mask-history", mask_history, "rank already-seen items last");

  auto* gc = app.add_subcommand("gradcheck", "Verify gradients against finite differences");
  std::uint64_t gc_seed = 7;
  gc->add_option("--seed", gc_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return run_synth(synth_args);
    if (*gc) return run_gradcheck(gc_seed);

    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (!data.empty()) cfg.data = data;
    if (!text_emb.empty()) cfg.text_embeddings = text_emb;
    if (!image_emb.empty()) cfg.image_embeddings = image_emb;
    if (!out.empty()) cfg.out = out;
    if (!model_path.empty()) cfg.checkpoint = model_path;

    if (*train) {
      if (train->count("--epochs")) cfg.train.epochs = epochs;
      if (train->count("--lr")) cfg.train.lr = lr;
      if (train->count("--batch-size")) cfg.train.batch_size = batch_size;
      if (train->count("--eval-every")) cfg.train.eval_every = eval_every;
      if (train->count("--seed")) cfg.train.seed = seed;
      if (train->count("--lambda")) cfg.train.model.lambda = lambda;
      if (train->count("--d-h")) cfg.train.model.d_h = d_h;
      if (train->count("--d-i")) cfg.train.model.d_i = d_i;
      if (train->count("--d-m")) cfg.train.model.d_m = d_m;
      if (train->count("--layers")) cfg.train.model.layers = layers;
      if (train->count("--views")) cfg.train.model.views = views_from_string(views);
      if (no_coattention) cfg.train.model.coattention = false;
      if (train->count("--head")) cfg.train.model.head = head_from_string(head);
      return run_train(std::move(cfg), k_core);
    }
    if (*eval) {
      if (eval->count("--k")) cfg.ks = ks;
      if (eval->count("--buckets")) cfg.buckets = buckets;
      if (mask_history) cfg.mask_history = true;
      return run_eval(std::move(cfg), k_core, split_name);
    }
    if (*rec) {
      if (mask_history) cfg.mask_history = true;
      return run_recommend(std::move(cfg), k_core, user, top_k);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
