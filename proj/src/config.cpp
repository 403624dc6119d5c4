#include "seqtok/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <variant>

namespace seqtok {

namespace {

using FieldPtr = std::variant<long long TrainConfig::*, double TrainConfig::*,
                              bool TrainConfig::*, std::string TrainConfig::*>;

struct FieldDef {
  const char* key;
  FieldPtr ptr;
};

const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> defs = {
      {"seed", &TrainConfig::seed},
      {"image_size", &TrainConfig::image_size},
      {"channels", &TrainConfig::channels},
      {"patch_size", &TrainConfig::patch_size},
      {"enc_layers", &TrainConfig::enc_layers},
      {"dec_layers", &TrainConfig::dec_layers},
      {"tokenizer_width", &TrainConfig::tokenizer_width},
      {"tokenizer_heads", &TrainConfig::tokenizer_heads},
      {"latent_dim", &TrainConfig::latent_dim},
      {"num_tokens", &TrainConfig::num_tokens},
      {"conv_channels", &TrainConfig::conv_channels},
      {"codebook_size", &TrainConfig::codebook_size},
      {"temperature", &TrainConfig::temperature},
      {"ar_layers", &TrainConfig::ar_layers},
      {"ar_heads", &TrainConfig::ar_heads},
      {"ar_width", &TrainConfig::ar_width},
      {"aux_layers", &TrainConfig::aux_layers},
      {"aux_heads", &TrainConfig::aux_heads},
      {"aux_width", &TrainConfig::aux_width},
      {"data_source", &TrainConfig::data_source},
      {"data_path", &TrainConfig::data_path},
      {"num_classes", &TrainConfig::num_classes},
      {"train_count", &TrainConfig::train_count},
      {"val_count", &TrainConfig::val_count},
      {"val_fraction", &TrainConfig::val_fraction},
      {"batch_size", &TrainConfig::batch_size},
      {"steps", &TrainConfig::steps},
      {"lr", &TrainConfig::lr},
      {"lr_min", &TrainConfig::lr_min},
      {"beta1", &TrainConfig::beta1},
      {"beta2_tokenizer", &TrainConfig::beta2_tokenizer},
      {"beta2_ar", &TrainConfig::beta2_ar},
      {"disc_lr", &TrainConfig::disc_lr},
      {"disc_base", &TrainConfig::disc_base},
      {"ema_decay", &TrainConfig::ema_decay},
      {"grad_clip", &TrainConfig::grad_clip},
      {"nested_dropout", &TrainConfig::nested_dropout},
      {"class_dropout", &TrainConfig::class_dropout},
      {"gan_warmup", &TrainConfig::gan_warmup},
      {"ntp_backprop", &TrainConfig::ntp_backprop},
      {"lambda_l2", &TrainConfig::lambda_l2},
      {"lambda_lpips", &TrainConfig::lambda_lpips},
      {"lambda_gan", &TrainConfig::lambda_gan},
      {"lambda_lecam", &TrainConfig::lambda_lecam},
      {"lambda_reg", &TrainConfig::lambda_reg},
      {"lambda_entropy", &TrainConfig::lambda_entropy},
      {"lambda_ntp", &TrainConfig::lambda_ntp},
      {"lambda_apr_l2", &TrainConfig::lambda_apr_l2},
      {"lambda_apr_lpips", &TrainConfig::lambda_apr_lpips},
      {"lambda_sem", &TrainConfig::lambda_sem},
      {"lambda_sem_decoder", &TrainConfig::lambda_sem_decoder},
      {"lambda_aux_ntp", &TrainConfig::lambda_aux_ntp},
      {"align_mode", &TrainConfig::align_mode},
      {"decoder_align", &TrainConfig::decoder_align},
      {"align_layer", &TrainConfig::align_layer},
      {"provider_seed", &TrainConfig::provider_seed},
      {"feat_dim", &TrainConfig::feat_dim},
      {"perceptual_seed", &TrainConfig::perceptual_seed},
      {"extractor_seed", &TrainConfig::extractor_seed},
      {"fid_samples", &TrainConfig::fid_samples},
      {"eval_batch", &TrainConfig::eval_batch},
  };
  return defs;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_key(const std::string& key) {
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (const FieldDef& f : fields()) {
    const std::size_t d = edit_distance(key, f.key);
    if (d < best_d) {
      best_d = d;
      best = f.key;
    }
  }
  return best;
}

const FieldDef& find_field(const std::string& key) {
  for (const FieldDef& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + key + "' (did you mean '" + nearest_key(key) + "'?)");
}

void assign_from_json(TrainConfig& cfg, const FieldDef& field, const nlohmann::json& value) {
  std::visit(
      [&](auto ptr) {
        using T = std::remove_reference_t<decltype(cfg.*ptr)>;
        if constexpr (std::is_same_v<T, long long>) {
          if (!value.is_number_integer()) {
            throw ConfigError(std::string("config key '") + field.key + "' expects an integer");
          }
          cfg.*ptr = value.get<long long>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!value.is_number()) {
            throw ConfigError(std::string("config key '") + field.key + "' expects a number");
          }
          cfg.*ptr = value.get<double>();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!value.is_boolean()) {
            throw ConfigError(std::string("config key '") + field.key + "' expects a boolean");
          }
          cfg.*ptr = value.get<bool>();
        } else {
          if (!value.is_string()) {
            throw ConfigError(std::string("config key '") + field.key + "' expects a string");
          }
          cfg.*ptr = value.get<std::string>();
        }
      },
      field.ptr);
}

void assign_from_text(TrainConfig& cfg, const FieldDef& field, const std::string& text) {
  std::visit(
      [&](auto ptr) {
        using T = std::remove_reference_t<decltype(cfg.*ptr)>;
        try {
          if constexpr (std::is_same_v<T, long long>) {
            std::size_t used = 0;
            const long long v = std::stoll(text, &used);
            if (used != text.size()) throw std::invalid_argument("trailing");
            cfg.*ptr = v;
          } else if constexpr (std::is_same_v<T, double>) {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument("trailing");
            cfg.*ptr = v;
          } else if constexpr (std::is_same_v<T, bool>) {
            if (text == "true" || text == "1") {
              cfg.*ptr = true;
            } else if (text == "false" || text == "0") {
              cfg.*ptr = false;
            } else {
              throw std::invalid_argument("bool");
            }
          } else {
            cfg.*ptr = text;
          }
        } catch (const std::exception&) {
          throw ConfigError(std::string("cannot parse value '") + text + "' for config key '" +
                            field.key + "'");
        }
      },
      field.ptr);
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](long long v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(image_size, "image_size");
  positive(channels, "channels");
  positive(patch_size, "patch_size");
  positive(num_tokens, "num_tokens");
  positive(latent_dim, "latent_dim");
  positive(batch_size, "batch_size");
  positive(steps, "steps");
  positive(num_classes, "num_classes");
  if (codebook_size < 2) throw ConfigError("codebook_size must be at least 2");
  if (image_size % patch_size != 0) throw ConfigError("image_size not divisible by patch_size");
  if (tokenizer_width % tokenizer_heads != 0) {
    throw ConfigError("tokenizer_width not divisible by tokenizer_heads");
  }
  if (ar_width % ar_heads != 0) throw ConfigError("ar_width not divisible by ar_heads");
  if (aux_width % aux_heads != 0) throw ConfigError("aux_width not divisible by aux_heads");
  if (temperature <= 0) throw ConfigError("temperature must be positive");
  auto unit_range = [](double v, const char* what) {
    if (v < 0 || v > 1) throw ConfigError(std::string(what) + " must lie in [0,1]");
  };
  unit_range(nested_dropout, "nested_dropout");
  unit_range(class_dropout, "class_dropout");
  unit_range(gan_warmup, "gan_warmup");
  unit_range(val_fraction, "val_fraction");
  unit_range(ema_decay, "ema_decay");
  if (lr <= 0 || lr_min < 0 || lr_min > lr) throw ConfigError("need lr >= lr_min >= 0 and lr > 0");
  if (grad_clip <= 0) throw ConfigError("grad_clip must be positive");
  if (data_source != "synthetic" && data_source != "directory") {
    throw ConfigError("data_source must be 'synthetic' or 'directory'");
  }
  if (data_source == "directory" && data_path.empty()) {
    throw ConfigError("directory data_source requires data_path");
  }
  if (align_layer < 1 || align_layer > dec_layers) {
    throw ConfigError("align_layer outside decoder depth");
  }
  AlignMode mode = parse_align_mode(align_mode);
  if (mode == AlignMode::direct) {
    near_square_factor(num_tokens);  // throws for prime lengths
  }
  loss_weights().validate();
  tokenizer_config().validate();
  ar_config().validate();
  aux_config().validate();
}

TokenizerConfig TrainConfig::tokenizer_config() const {
  TokenizerConfig t;
  t.image_size = image_size;
  t.channels = channels;
  t.patch = patch_size;
  t.width = tokenizer_width;
  t.latent_dim = latent_dim;
  t.num_queries = num_tokens;
  t.enc_layers = enc_layers;
  t.dec_layers = dec_layers;
  t.heads = tokenizer_heads;
  t.align_layer = align_layer;
  t.conv_channels = conv_channels;
  return t;
}

ARConfig TrainConfig::ar_config() const {
  ARConfig a;
  a.layers = ar_layers;
  a.heads = ar_heads;
  a.width = ar_width;
  a.vocab = codebook_size;
  a.seq_len = num_tokens;
  a.num_classes = num_classes;
  a.code_dim = latent_dim;
  return a;
}

ARConfig TrainConfig::aux_config() const {
  ARConfig a = ar_config();
  a.layers = aux_layers;
  a.heads = aux_heads;
  a.width = aux_width;
  return a;
}

DatasetSpec TrainConfig::dataset_spec() const {
  DatasetSpec d;
  d.source = data_source == "synthetic" ? DatasetSpec::Source::synthetic
                                        : DatasetSpec::Source::directory;
  d.path = data_path;
  d.resolution = image_size;
  d.channels = channels;
  d.num_classes = num_classes;
  d.train_count = train_count;
  d.val_count = val_count;
  d.val_fraction = val_fraction;
  d.seed = static_cast<uint64_t>(seed);
  return d;
}

LossWeights TrainConfig::loss_weights() const {
  LossWeights w;
  w.recon_l2 = lambda_l2;
  w.recon_perc = lambda_lpips;
  w.gan = lambda_gan;
  w.lecam = lambda_lecam;
  w.reg = lambda_reg;
  w.entropy = lambda_entropy;
  w.ntp = lambda_ntp;
  w.apr_l2 = lambda_apr_l2;
  w.apr_perc = lambda_apr_lpips;
  w.sem = lambda_sem;
  w.sem_dec = lambda_sem_decoder;
  w.aux_ntp = lambda_aux_ntp;
  return w;
}

std::string TrainConfig::to_json_string(int indent) const {
  nlohmann::json j;
  for (const FieldDef& f : fields()) {
    std::visit([&](auto ptr) { j[f.key] = this->*ptr; }, f.ptr);
  }
  return j.dump(indent);
}

std::vector<std::string> TrainConfig::key_names() {
  std::vector<std::string> names;
  for (const FieldDef& f : fields()) names.emplace_back(f.key);
  return names;
}

std::vector<std::string> TrainConfig::preset_names() { return {"desk", "S", "B", "L", "H"}; }

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig c;  // defaults are the desk preset
  if (name == "desk" || name.empty()) return c;
  if (name != "S" && name != "B" && name != "L" && name != "H") {
    throw ConfigError("unknown preset '" + name + "' (expected desk|S|B|L|H)");
  }
  // Published full-scale table values; untested at full scale on this build.
  c.image_size = 256;
  c.patch_size = 16;
  c.enc_layers = 12;
  c.dec_layers = 12;
  c.tokenizer_width = 768;
  c.tokenizer_heads = 12;
  c.latent_dim = 64;
  c.num_tokens = 256;
  c.codebook_size = 4096;
  c.num_classes = 1000;
  c.ar_layers = 12;
  c.ar_heads = 12;
  c.ar_width = 768;
  c.batch_size = 256;
  c.steps = 2000000;
  c.lr = 1e-4;
  c.lr_min = 1e-6;
  c.ema_decay = 0.9999;
  c.nested_dropout = 0.5;
  c.lambda_ntp = 0.1;
  c.align_mode = "implicit";
  c.decoder_align = true;
  c.align_layer = 6;
  c.data_source = "directory";
  if (name == "B") {
    c.ar_width = 1024;
    c.ar_heads = 16;
  } else if (name == "L") {
    c.ar_layers = 24;
    c.ar_width = 1024;
    c.ar_heads = 16;
  } else if (name == "H") {
    c.enc_layers = 16;
    c.dec_layers = 16;
    c.tokenizer_width = 1024;
    c.tokenizer_heads = 16;
    c.ar_layers = 32;
    c.ar_width = 1280;
    c.ar_heads = 20;
    c.lambda_ntp = 0.01;
    c.nested_dropout = 1.0;
  }
  return c;
}

void TrainConfig::apply_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid json: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a json object");
  for (const auto& [key, value] : j.items()) {
    assign_from_json(*this, find_field(key), value);
  }
}

void TrainConfig::apply_override(const std::string& key_equals_value) {
  const auto eq = key_equals_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + key_equals_value + "'");
  }
  const std::string key = key_equals_value.substr(0, eq);
  const std::string value = key_equals_value.substr(eq + 1);
  assign_from_text(*this, find_field(key), value);
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  TrainConfig c;
  c.apply_json_text(text);
  return c;
}

TrainConfig TrainConfig::load(const std::string& preset_name, const std::string& path,
                              const std::vector<std::string>& overrides) {
  TrainConfig c = preset(preset_name);
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    c.apply_json_text(buffer.str());
  }
  for (const std::string& o : overrides) c.apply_override(o);
  c.validate();
  return c;
}

}  // namespace seqtok
