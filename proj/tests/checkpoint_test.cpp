#include "truthsr/checkpoint.hpp"

#include "truthsr/config.hpp"
#include "truthsr/forward.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "test_util.hpp"

using namespace truthsr;

namespace {

// Deliberately non-default everywhere so a loader that silently falls back
// to defaults cannot pass. d_t != d_v keeps img_proj in the manifest.
ModelConfig probe_config() {
  ModelConfig cfg;
  cfg.item_count = 4;
  cfg.d_i = 3;
  cfg.d_t = 3;
  cfg.d_v = 2;
  cfg.d_m = 3;
  cfg.d_h = 4;
  cfg.layers = 2;
  cfg.max_len = 7;
  cfg.bank_max = 4;
  cfg.lambda = 0.25;
  cfg.eps = 1e-6;
  cfg.views = Views::Both;
  cfg.coattention = false;
  cfg.head = HeadKind::Softmax;
  return cfg;
}

std::vector<std::string> probe_names() { return {"alpha", "beta", "gamma", "delta"}; }

struct FileParts {
  std::string header;   // the JSON line, without its trailing newline
  std::string payload;  // raw f32 bytes
};

FileParts split_file(const std::string& bytes) {
  REQUIRE(bytes.size() > 6);
  REQUIRE(bytes.substr(0, 6) == "TSRM1\n");
  const auto nl = bytes.find('\n', 6);
  REQUIRE(nl != std::string::npos);
  return {bytes.substr(6, nl - 6), bytes.substr(nl + 1)};
}

std::string assemble(const std::string& header, const std::string& payload) {
  return "TSRM1\n" + header + "\n" + payload;
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("round trip restores config, item names, and every tensor bit for bit") {
  testutil::TempDir tmp;
  const ModelConfig cfg = probe_config();
  const auto params = init_params<float>(cfg, 99);
  const auto path = tmp.path / "model.tsrm";
  save_checkpoint(params, probe_names(), path);

  const Checkpoint ck = load_checkpoint(path);
  CHECK(ck.item_names == probe_names());

  const ModelConfig& lc = ck.params.cfg;
  CHECK(lc.item_count == cfg.item_count);
  CHECK(lc.d_i == cfg.d_i);
  CHECK(lc.d_t == cfg.d_t);
  CHECK(lc.d_v == cfg.d_v);
  CHECK(lc.d_m == cfg.d_m);
  CHECK(lc.d_h == cfg.d_h);
  CHECK(lc.layers == cfg.layers);
  CHECK(lc.max_len == cfg.max_len);
  CHECK(lc.bank_max == cfg.bank_max);
  CHECK(lc.lambda == cfg.lambda);
  CHECK(lc.eps == cfg.eps);
  CHECK(lc.views == cfg.views);
  CHECK(lc.coattention == cfg.coattention);
  CHECK(lc.head == cfg.head);

  const auto saved = params.tensors();
  const auto loaded = ck.params.tensors();
  REQUIRE(saved.size() == loaded.size());
  CHECK(ck.params.img_proj.rows() == cfg.d_t);
  CHECK(ck.params.img_proj.cols() == cfg.d_v);
  for (std::size_t i = 0; i < saved.size(); ++i) {
    CHECK(saved[i].name == loaded[i].name);
    REQUIRE(saved[i].rows == loaded[i].rows);
    REQUIRE(saved[i].cols == loaded[i].cols);
    const std::size_t bytes = static_cast<std::size_t>(saved[i].size()) * sizeof(float);
    CHECK(std::memcmp(saved[i].data, loaded[i].data, bytes) == 0);
  }
}

TEST_CASE("a loaded model predicts exactly like the one that was saved") {
  testutil::TempDir tmp;
  const auto params = init_params<float>(probe_config(), 99);
  const auto path = tmp.path / "model.tsrm";
  save_checkpoint(params, probe_names(), path);
  const Checkpoint ck = load_checkpoint(path);

  FeatureBundle<float> f;
  f.ids = {1, 3};
  f.t_u.resize(3, 2);
  f.t_u << 0.4f, -0.9f, 1.1f, 0.2f, -0.3f, 0.7f;
  f.z.resize(2, 2);
  f.z << 0.3f, -1.2f, 0.8f, 0.4f;
  f.has_image = {1, 1};
  f.banks = {Mat<float>(3, 0), Mat<float>(3, 0)};

  const auto a = forward_sample(params, f);
  const auto b = forward_sample(ck.params, f);
  CHECK(a.rank_score == b.rank_score);
  CHECK(a.expected_prob == b.expected_prob);
  CHECK(a.uncertainty == b.uncertainty);
  CHECK(a.l_tv == b.l_tv);
}

TEST_CASE("saving is deterministic and a reloaded model saves byte-identically") {
  testutil::TempDir tmp;
  const auto params = init_params<float>(probe_config(), 99);
  const auto p1 = tmp.path / "a.tsrm";
  const auto p2 = tmp.path / "b.tsrm";
  const auto p3 = tmp.path / "c.tsrm";

  save_checkpoint(params, probe_names(), p1);
  save_checkpoint(params, probe_names(), p2);
  const std::string bytes1 = testutil::read_file(p1);
  CHECK(bytes1 == testutil::read_file(p2));

  const Checkpoint ck = load_checkpoint(p1);
  save_checkpoint(ck.params, ck.item_names, p3);
  CHECK(bytes1 == testutil::read_file(p3));
}

TEST_CASE("the file layout is magic, one JSON header line, then raw tensors") {
  testutil::TempDir tmp;
  const auto params = init_params<float>(probe_config(), 99);
  const auto path = tmp.path / "model.tsrm";
  save_checkpoint(params, probe_names(), path);

  const FileParts parts = split_file(testutil::read_file(path));
  const auto header = nlohmann::json::parse(parts.header);
  CHECK(header["format"] == "TSRM1");
  CHECK(header["items"] == nlohmann::json(probe_names()));

  const auto refs = params.tensors();
  REQUIRE(header["tensors"].is_array());
  REQUIRE(header["tensors"].size() == refs.size());
  CHECK(header["tensors"][0]["name"] == "id_table");
  std::size_t total = 0;
  for (const auto& entry : header["tensors"]) {
    total += entry["rows"].get<std::size_t>() * entry["cols"].get<std::size_t>();
  }
  CHECK(parts.payload.size() == total * sizeof(float));
}

TEST_CASE("save validates its inputs") {
  testutil::TempDir tmp;
  const ModelConfig cfg = probe_config();
  const auto params = init_params<float>(cfg, 99);

  SUBCASE("item name count must match the model") {
    const std::vector<std::string> three = {"a", "b", "c"};
    CHECK_THROWS_AS(save_checkpoint(params, three, tmp.path / "m.tsrm"), DataError);
  }
  SUBCASE("non-finite parameters are refused") {
    auto bad = params;
    bad.wm(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(save_checkpoint(bad, probe_names(), tmp.path / "m.tsrm"), DataError);
  }
  SUBCASE("an unopenable path is reported") {
    const auto missing_dir = tmp.path / "no_such_dir" / "m.tsrm";
    CHECK_THROWS_AS(save_checkpoint(params, probe_names(), missing_dir), DataError);
  }
}

TEST_CASE("load rejects malformed files") {
  testutil::TempDir tmp;
  const auto params = init_params<float>(probe_config(), 99);
  const auto good_path = tmp.path / "good.tsrm";
  save_checkpoint(params, probe_names(), good_path);
  const std::string good = testutil::read_file(good_path);
  const FileParts parts = split_file(good);
  const auto path = tmp.path / "bad.tsrm";

  auto expect_parse_error = [&](const std::string& needle) {
    try {
      load_checkpoint(path);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "nowhere.tsrm"), DataError);
  }
  SUBCASE("bad magic") {
    testutil::write_file(path, "XSRM1\n" + parts.header + "\n" + parts.payload);
    expect_parse_error("magic");
  }
  SUBCASE("magic with nothing after it") {
    testutil::write_file(path, "TSRM1\n");
    expect_parse_error("header");
  }
  SUBCASE("header is not JSON") {
    testutil::write_file(path, "TSRM1\n{oops\n");
    expect_parse_error("invalid header JSON");
  }
  SUBCASE("header missing a required key") {
    auto header = nlohmann::json::parse(parts.header);
    header.erase("tensors");
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("tensors");
  }
  SUBCASE("wrong format tag") {
    auto header = nlohmann::json::parse(parts.header);
    header["format"] = "TSRM9";
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("format");
  }
  SUBCASE("config missing a field") {
    auto header = nlohmann::json::parse(parts.header);
    header["config"].erase("d_h");
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("d_h");
  }
  SUBCASE("item list shorter than the configured vocabulary") {
    auto header = nlohmann::json::parse(parts.header);
    header["items"] = {"a", "b"};
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("item");
  }
  SUBCASE("item names must be strings") {
    auto header = nlohmann::json::parse(parts.header);
    header["items"] = {1, 2, 3, 4};
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("strings");
  }
  SUBCASE("empty manifest") {
    auto header = nlohmann::json::parse(parts.header);
    header["tensors"] = nlohmann::json::array();
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("manifest size");
  }
  SUBCASE("manifest shape disagrees with the config") {
    auto header = nlohmann::json::parse(parts.header);
    header["tensors"][0]["rows"] = 999;
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("id_table");
  }
  SUBCASE("config is authoritative for allocation") {
    // d_t == d_v drops img_proj from the allocated model, so the saved
    // manifest no longer lines up.
    auto header = nlohmann::json::parse(parts.header);
    header["config"]["d_v"] = 3;
    testutil::write_file(path, assemble(header.dump(), parts.payload));
    expect_parse_error("manifest");
  }
  SUBCASE("truncated payload") {
    testutil::write_file(path, good.substr(0, good.size() - 4));
    expect_parse_error("truncated");
  }
  SUBCASE("trailing bytes") {
    testutil::write_file(path, good + "xx");
    expect_parse_error("trailing");
  }
  SUBCASE("non-finite payload values") {
    std::string bytes = good;
    const float nan_value = std::numeric_limits<float>::quiet_NaN();
    char nan_bytes[sizeof(float)];
    std::memcpy(nan_bytes, &nan_value, sizeof(float));
    bytes.replace(good.size() - parts.payload.size(), sizeof(float), nan_bytes, sizeof(float));
    testutil::write_file(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
  }
}

TEST_SUITE_END();
