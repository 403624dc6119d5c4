#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seqtok/config.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

using namespace seqtok;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& text) {
    path = "/tmp/seqtok_test_config_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter()++) + ".json";
    std::ofstream out(path);
    out << text;
  }
  ~TempFile() { std::remove(path.c_str()); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("desk preset defaults") {
  const TrainConfig c = TrainConfig::preset("desk");
  CHECK(c.image_size == 32);
  CHECK(c.patch_size == 8);
  CHECK(c.num_tokens == 16);
  CHECK(c.codebook_size == 64);
  CHECK(c.num_classes == 8);
  CHECK(c.lr == doctest::Approx(1e-3));
  CHECK(c.ema_decay == doctest::Approx(0.99));
  CHECK(c.data_source == "synthetic");
  CHECK(c.ntp_backprop);
  CHECK_NOTHROW(c.validate());
  // Empty preset name means desk.
  CHECK(TrainConfig::preset("").to_json_string() == c.to_json_string());
}

TEST_CASE("published large-scale presets carry the table values") {
  const TrainConfig l = TrainConfig::preset("L");
  CHECK(l.lambda_ntp == doctest::Approx(0.1));
  CHECK(l.lr == doctest::Approx(1e-4));
  CHECK(l.lr_min == doctest::Approx(1e-6));
  CHECK(l.ema_decay == doctest::Approx(0.9999));
  CHECK(l.beta2_tokenizer == doctest::Approx(0.999));
  CHECK(l.beta2_ar == doctest::Approx(0.95));
  CHECK(l.nested_dropout == doctest::Approx(0.5));
  CHECK(l.ar_layers == 24);
  CHECK(l.codebook_size == 4096);
  CHECK(l.num_tokens == 256);

  const TrainConfig h = TrainConfig::preset("H");
  CHECK(h.lambda_ntp == doctest::Approx(0.01));
  CHECK(h.nested_dropout == doctest::Approx(1.0));
  CHECK(h.ar_layers == 32);

  CHECK_THROWS_AS(TrainConfig::preset("XL"), ConfigError);
}

TEST_CASE("unknown keys are rejected with a nearest-key hint") {
  TrainConfig c;
  try {
    c.apply_override("lambda_ntpp=0.5");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lambda_ntpp") != std::string::npos);
    CHECK(msg.find("lambda_ntp") != std::string::npos);  // the suggestion
  }
}

TEST_CASE("override parsing for every value kind") {
  TrainConfig c;
  c.apply_override("steps=123");
  CHECK(c.steps == 123);
  c.apply_override("lr=0.5");
  CHECK(c.lr == doctest::Approx(0.5));
  c.apply_override("align_mode=implicit");
  CHECK(c.align_mode == "implicit");
  c.apply_override("ntp_backprop=false");
  CHECK_FALSE(c.ntp_backprop);
  c.apply_override("ntp_backprop=true");
  CHECK(c.ntp_backprop);
  c.apply_override("decoder_align=1");
  CHECK(c.decoder_align);

  CHECK_THROWS_AS(c.apply_override("steps"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("=5"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("steps=abc"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("lr=fast"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("ntp_backprop=maybe"), ConfigError);
}

TEST_CASE("layering: preset < file < overrides") {
  TempFile file(R"({"steps": 50, "lr": 0.01, "align_mode": "direct"})");
  const TrainConfig c = TrainConfig::load("desk", file.path, {"lr=0.02", "batch_size=4"});
  CHECK(c.steps == 50);               // from file
  CHECK(c.lr == doctest::Approx(0.02));  // override beats file
  CHECK(c.align_mode == "direct");    // from file
  CHECK(c.batch_size == 4);           // from override
  CHECK(c.image_size == 32);          // untouched desk default
}

TEST_CASE("load with missing file fails, empty path is allowed") {
  CHECK_THROWS_AS(TrainConfig::load("desk", "/nonexistent/config.json", {}), IoError);
  CHECK_NOTHROW(TrainConfig::load("desk", "", {}));
}

TEST_CASE("malformed json and wrong value types are config errors") {
  TrainConfig c;
  CHECK_THROWS_AS(c.apply_json_text("not json"), ConfigError);
  CHECK_THROWS_AS(c.apply_json_text("[1,2,3]"), ConfigError);
  CHECK_THROWS_AS(c.apply_json_text(R"({"steps": "many"})"), ConfigError);
  CHECK_THROWS_AS(c.apply_json_text(R"({"no_such_key": 1})"), ConfigError);
}

TEST_CASE("json round trip preserves every field") {
  TrainConfig c = TrainConfig::preset("desk");
  c.steps = 77;
  c.lr = 0.123;
  c.align_mode = "substitution";
  c.decoder_align = true;
  c.ntp_backprop = false;
  c.data_path = "/some/where";
  const TrainConfig back = TrainConfig::from_json_string(c.to_json_string());
  CHECK(back.to_json_string() == c.to_json_string());
  CHECK(back.steps == 77);
  CHECK(back.lr == doctest::Approx(0.123));
  CHECK(back.align_mode == "substitution");
  CHECK(back.decoder_align);
  CHECK_FALSE(back.ntp_backprop);
  CHECK(back.data_path == "/some/where");
}

TEST_CASE("last writer wins over random override sequences") {
  // Property: applying a shuffled sequence of assignments to the same keys
  // always leaves each field at its final assignment.
  Rng rng(91);
  const std::vector<std::string> keys = {"steps", "batch_size", "codebook_size"};
  for (int trial = 0; trial < 20; ++trial) {
    TrainConfig c;
    std::vector<std::pair<std::string, long long>> writes;
    for (int i = 0; i < 12; ++i) {
      const std::string key = keys[rng() % keys.size()];
      const long long value = 1 + static_cast<long long>(rng() % 1000);
      writes.push_back({key, value});
      c.apply_override(key + "=" + std::to_string(value));
    }
    for (auto it = writes.rbegin(); it != writes.rend(); ++it) {
      long long actual = -1;
      if (it->first == "steps") {
        actual = c.steps;
      } else if (it->first == "batch_size") {
        actual = c.batch_size;
      } else {
        actual = c.codebook_size;
      }
      // Only the LAST write per key must match; stop once each key is seen.
      bool earlier_overwritten = false;
      for (auto later = writes.rbegin(); later != it; ++later) {
        if (later->first == it->first) earlier_overwritten = true;
      }
      if (!earlier_overwritten) CHECK(actual == it->second);
    }
  }
}

TEST_CASE("validate rejects inconsistent geometry and ranges") {
  TrainConfig c;
  c.patch_size = 5;  // 32 % 5 != 0
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig();
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig();
  c.lambda_ntp = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig();
  c.nested_dropout = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig();
  c.align_mode = "bogus";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig();
  c.data_source = "directory";  // requires data_path
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("derived component configs are consistent") {
  const TrainConfig c = TrainConfig::preset("desk");
  const TokenizerConfig tk = c.tokenizer_config();
  CHECK(tk.image_size == c.image_size);
  CHECK(tk.num_queries == c.num_tokens);
  CHECK(tk.latent_dim == c.latent_dim);
  const ARConfig ar = c.ar_config();
  CHECK(ar.vocab == c.codebook_size);
  CHECK(ar.seq_len == c.num_tokens);
  CHECK(ar.num_classes == c.num_classes);
  CHECK(ar.code_dim == c.latent_dim);
  const ARConfig aux = c.aux_config();
  CHECK(aux.width == c.aux_width);
  CHECK(aux.vocab == c.codebook_size);
  const LossWeights w = c.loss_weights();
  CHECK(w.ntp == doctest::Approx(c.lambda_ntp));
  CHECK(w.sem_dec == doctest::Approx(c.lambda_sem_decoder));
}

TEST_CASE("key_names covers the json surface") {
  const std::vector<std::string> keys = TrainConfig::key_names();
  CHECK(keys.size() >= 50);
  bool has_lambda_ntp = false, has_seed = false;
  for (const auto& k : keys) {
    has_lambda_ntp = has_lambda_ntp || k == "lambda_ntp";
    has_seed = has_seed || k == "seed";
  }
  CHECK(has_lambda_ntp);
  CHECK(has_seed);
}
