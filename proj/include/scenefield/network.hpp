#pragma once

// The two neural field decoders and their shared backbone.
//
// Trunk input is the sinusoidal encoding of the object-frame position
// concatenated with the object latent code. Two fully connected ReLU layers
// feed three heads:
//   - density head: linear -> softplus (never sees the view direction)
//   - color head: [trunk output, encoded view direction] -> hidden ReLU ->
//     linear -> sigmoid
//   - grasp head: trunk output -> hidden ReLU (x1 or x2) -> linear 7-wide:
//     score logit (sigmoid) plus two raw 3-vectors for rotation assembly
//
// Positional encoding layout for L frequencies (NeRF-style base pi):
//   [x, y, z] (if include_input), then for k = 0..L-1, axis i = x,y,z:
//   sin(2^k * pi * v_i), cos(2^k * pi * v_i).
// Positions are multiplied by coord_scale before encoding; directions are not.
//
// Checkpoint file: magic "SFCK", u32 version, config header, then each named
// parameter array as (name, rows, cols, row-major float32 little-endian).

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenefield/rng.hpp"
#include "scenefield/scene.hpp"
#include "scenefield/tape.hpp"
#include "scenefield/vec.hpp"

namespace scenefield {

struct NetworkConfig {
  int latent_dim = 32;
  int trunk_width = 64;
  int color_hidden = 64;
  int grasp_hidden = 64;
  int grasp_hidden_layers = 1;
  int pos_freqs = 6;
  int dir_freqs = 2;
  bool include_input = true;
  double coord_scale = 8.0;

  int pos_enc_len() const { return (include_input ? 3 : 0) + 6 * pos_freqs; }
  int dir_enc_len() const { return (include_input ? 3 : 0) + 6 * dir_freqs; }
  int trunk_in() const { return pos_enc_len() + latent_dim; }

  // Larger preset for higher-detail objects: ~45k parameters on the
  // radiance path plus ~34k for the grasp head.
  static NetworkConfig large() {
    NetworkConfig c;
    c.trunk_width = 128;
    c.color_hidden = 128;
    c.grasp_hidden = 128;
    c.grasp_hidden_layers = 2;
    return c;
  }
};

inline bool operator==(const NetworkConfig& a, const NetworkConfig& b) {
  return a.latent_dim == b.latent_dim && a.trunk_width == b.trunk_width &&
         a.color_hidden == b.color_hidden && a.grasp_hidden == b.grasp_hidden &&
         a.grasp_hidden_layers == b.grasp_hidden_layers && a.pos_freqs == b.pos_freqs &&
         a.dir_freqs == b.dir_freqs && a.include_input == b.include_input &&
         a.coord_scale == b.coord_scale;
}

// Number of stored floats on the radiance path (trunk + density + color heads).
inline size_t radiance_param_count(const NetworkConfig& c) {
  const size_t w = size_t(c.trunk_width);
  size_t n = 0;
  n += size_t(c.trunk_in()) * w + w;   // trunk layer 1
  n += w * w + w;                      // trunk layer 2
  n += w * 1 + 1;                      // density head
  n += (w + size_t(c.dir_enc_len())) * size_t(c.color_hidden) + size_t(c.color_hidden);
  n += size_t(c.color_hidden) * 3 + 3;
  return n;
}

// Additional floats introduced by the grasp head.
inline size_t grasp_param_count(const NetworkConfig& c) {
  const size_t w = size_t(c.trunk_width), h = size_t(c.grasp_hidden);
  size_t n = w * h + h;
  for (int l = 1; l < c.grasp_hidden_layers; ++l) n += h * h + h;
  n += h * 7 + 7;
  return n;
}

namespace names {
inline const char* kTrunkW1 = "trunk.w1";
inline const char* kTrunkB1 = "trunk.b1";
inline const char* kTrunkW2 = "trunk.w2";
inline const char* kTrunkB2 = "trunk.b2";
inline const char* kSigmaW = "sigma.w";
inline const char* kSigmaB = "sigma.b";
inline const char* kColorW1 = "color.w1";
inline const char* kColorB1 = "color.b1";
inline const char* kColorW2 = "color.w2";
inline const char* kColorB2 = "color.b2";
inline const char* kGraspW1 = "grasp.w1";
inline const char* kGraspB1 = "grasp.b1";
inline const char* kGraspW2 = "grasp.w2";
inline const char* kGraspB2 = "grasp.b2";
inline const char* kGraspOutW = "grasp.out_w";
inline const char* kGraspOutB = "grasp.out_b";
inline const char* kLatents = "latents";
}  // namespace names

inline std::vector<std::string> decoder_param_names(const NetworkConfig& c) {
  std::vector<std::string> v = {names::kTrunkW1, names::kTrunkB1, names::kTrunkW2,
                                names::kTrunkB2, names::kSigmaW,  names::kSigmaB,
                                names::kColorW1, names::kColorB1, names::kColorW2,
                                names::kColorB2, names::kGraspW1, names::kGraspB1};
  if (c.grasp_hidden_layers > 1) {
    v.push_back(names::kGraspW2);
    v.push_back(names::kGraspB2);
  }
  v.push_back(names::kGraspOutW);
  v.push_back(names::kGraspOutB);
  return v;
}

// Seeded init: weights uniform in +-1/sqrt(fan_in), biases zero, latent table
// rows from N(0, 0.1^2).
inline ParameterStore init_params(const NetworkConfig& c, int num_latents, uint64_t seed) {
  if (c.grasp_hidden_layers < 1 || c.grasp_hidden_layers > 2)
    throw std::invalid_argument("grasp_hidden_layers must be 1 or 2");
  ParameterStore p;
  Rng rng(seed);
  auto add_linear = [&](const std::string& w, const std::string& b, int in, int out) {
    const int wi = p.add(w, in, out);
    const double s = 1.0 / std::sqrt(double(in));
    for (double& x : p.entries[size_t(wi)].value.v) x = rng.uniform(-s, s);
    p.add(b, 1, out);
  };
  add_linear(names::kTrunkW1, names::kTrunkB1, c.trunk_in(), c.trunk_width);
  add_linear(names::kTrunkW2, names::kTrunkB2, c.trunk_width, c.trunk_width);
  add_linear(names::kSigmaW, names::kSigmaB, c.trunk_width, 1);
  add_linear(names::kColorW1, names::kColorB1, c.trunk_width + c.dir_enc_len(), c.color_hidden);
  add_linear(names::kColorW2, names::kColorB2, c.color_hidden, 3);
  add_linear(names::kGraspW1, names::kGraspB1, c.trunk_width, c.grasp_hidden);
  if (c.grasp_hidden_layers > 1)
    add_linear(names::kGraspW2, names::kGraspB2, c.grasp_hidden, c.grasp_hidden);
  add_linear(names::kGraspOutW, names::kGraspOutB, c.grasp_hidden, 7);
  const int li = p.add(names::kLatents, num_latents, c.latent_dim);
  for (double& x : p.entries[size_t(li)].value.v) x = rng.normal(0.0, 0.1);
  return p;
}

// --- positional encoding ---

inline void positional_encode_into(const Vec3& p, int num_freqs, bool include_input,
                                   double* out) {
  int k = 0;
  if (include_input) {
    out[k++] = p.x;
    out[k++] = p.y;
    out[k++] = p.z;
  }
  double freq = 3.14159265358979323846;
  for (int f = 0; f < num_freqs; ++f) {
    for (int axis = 0; axis < 3; ++axis) {
      const double v = freq * p[axis];
      out[k++] = std::sin(v);
      out[k++] = std::cos(v);
    }
    freq *= 2.0;
  }
}

inline std::vector<double> positional_encode(const Vec3& p, int num_freqs,
                                             bool include_input = true) {
  if (num_freqs < 1) throw std::invalid_argument("num_freqs must be >= 1");
  std::vector<double> out((include_input ? 3 : 0) + size_t(6) * num_freqs);
  positional_encode_into(p, num_freqs, include_input, out.data());
  return out;
}

inline Tensor encode_positions(const std::vector<Vec3>& pts, int num_freqs, bool include_input,
                               double scale) {
  Tensor t(int(pts.size()), (include_input ? 3 : 0) + 6 * num_freqs);
  for (size_t i = 0; i < pts.size(); ++i)
    positional_encode_into(pts[i] * scale, num_freqs, include_input, t.row_ptr(int(i)));
  return t;
}

// --- forward evaluation (plain, batched) ---

struct FieldOutputs {
  Tensor sigma;   // S x 1
  Tensor color;   // S x 3
  Tensor score;   // S x 1
  Tensor a_raw;   // S x 3
  Tensor b_raw;   // S x 3
};

namespace detail {

inline Tensor linear_relu(const Tensor& x, const Tensor& w, const Tensor& b, bool relu) {
  Tensor y(x.rows, w.cols);
  kernels::matmul(y, x, w);
  for (int i = 0; i < y.rows; ++i) {
    double* row = y.row_ptr(i);
    for (int c = 0; c < y.cols; ++c) {
      row[c] += b.v[size_t(c)];
      if (relu && row[c] < 0.0) row[c] = 0.0;
    }
  }
  return y;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tensor t(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    double* row = t.row_ptr(i);
    std::memcpy(row, a.row_ptr(i), size_t(a.cols) * sizeof(double));
    std::memcpy(row + a.cols, b.row_ptr(i), size_t(b.cols) * sizeof(double));
  }
  return t;
}

}  // namespace detail

// Batched decoder evaluation. `enc_p` is the encoded (scaled) position batch,
// `latent_rows` the per-row latent codes; `enc_d` may be null when the color
// head is not wanted.
inline FieldOutputs field_forward(const ParameterStore& p, const NetworkConfig& c,
                                  const Tensor& enc_p, const Tensor& latent_rows,
                                  const Tensor* enc_d, bool want_color, bool want_grasp) {
  if (enc_p.rows != latent_rows.rows || latent_rows.cols != c.latent_dim)
    throw std::invalid_argument("field_forward input shape mismatch");
  const Tensor in = detail::concat_cols(enc_p, latent_rows);
  const Tensor h1 = detail::linear_relu(in, p.at(names::kTrunkW1).value,
                                        p.at(names::kTrunkB1).value, true);
  const Tensor h2 = detail::linear_relu(h1, p.at(names::kTrunkW2).value,
                                        p.at(names::kTrunkB2).value, true);
  FieldOutputs out;
  out.sigma = detail::linear_relu(h2, p.at(names::kSigmaW).value, p.at(names::kSigmaB).value,
                                  false);
  for (double& x : out.sigma.v) x = kernels::softplus(x);
  if (want_color) {
    if (!enc_d || enc_d->rows != enc_p.rows)
      throw std::invalid_argument("color head needs encoded directions");
    const Tensor cin = detail::concat_cols(h2, *enc_d);
    const Tensor ch = detail::linear_relu(cin, p.at(names::kColorW1).value,
                                          p.at(names::kColorB1).value, true);
    out.color = detail::linear_relu(ch, p.at(names::kColorW2).value,
                                    p.at(names::kColorB2).value, false);
    for (double& x : out.color.v) x = kernels::sigmoid(x);
  }
  if (want_grasp) {
    Tensor gh = detail::linear_relu(h2, p.at(names::kGraspW1).value,
                                    p.at(names::kGraspB1).value, true);
    if (c.grasp_hidden_layers > 1)
      gh = detail::linear_relu(gh, p.at(names::kGraspW2).value, p.at(names::kGraspB2).value,
                               true);
    const Tensor go = detail::linear_relu(gh, p.at(names::kGraspOutW).value,
                                          p.at(names::kGraspOutB).value, false);
    out.score = Tensor(go.rows, 1);
    out.a_raw = Tensor(go.rows, 3);
    out.b_raw = Tensor(go.rows, 3);
    for (int i = 0; i < go.rows; ++i) {
      const double* r = go.row_ptr(i);
      out.score.v[size_t(i)] = kernels::sigmoid(r[0]);
      for (int cix = 0; cix < 3; ++cix) {
        out.a_raw.at(i, cix) = r[1 + cix];
        out.b_raw.at(i, cix) = r[4 + cix];
      }
    }
  }
  return out;
}

// --- forward evaluation (tape) ---

struct FieldNodes {
  int trunk = -1;
  int sigma = -1;
  int color = -1;
  int score = -1;
  int a_raw = -1;
  int b_raw = -1;
};

inline FieldNodes field_forward_tape(Tape& t, const NetworkConfig& c, int enc_p, int latent_rows,
                                     int enc_d, bool want_color, bool want_grasp) {
  const int in = t.concat_cols(enc_p, latent_rows);
  const int h1 = t.relu(t.add_bias(t.matmul(in, t.leaf(names::kTrunkW1)), t.leaf(names::kTrunkB1)));
  const int h2 = t.relu(t.add_bias(t.matmul(h1, t.leaf(names::kTrunkW2)), t.leaf(names::kTrunkB2)));
  FieldNodes out;
  out.trunk = h2;
  out.sigma =
      t.softplus(t.add_bias(t.matmul(h2, t.leaf(names::kSigmaW)), t.leaf(names::kSigmaB)));
  if (want_color) {
    if (enc_d < 0) throw std::invalid_argument("color head needs encoded directions");
    const int cin = t.concat_cols(h2, enc_d);
    const int ch =
        t.relu(t.add_bias(t.matmul(cin, t.leaf(names::kColorW1)), t.leaf(names::kColorB1)));
    out.color =
        t.sigmoid(t.add_bias(t.matmul(ch, t.leaf(names::kColorW2)), t.leaf(names::kColorB2)));
  }
  if (want_grasp) {
    int gh = t.relu(t.add_bias(t.matmul(h2, t.leaf(names::kGraspW1)), t.leaf(names::kGraspB1)));
    if (c.grasp_hidden_layers > 1)
      gh = t.relu(t.add_bias(t.matmul(gh, t.leaf(names::kGraspW2)), t.leaf(names::kGraspB2)));
    const int go =
        t.add_bias(t.matmul(gh, t.leaf(names::kGraspOutW)), t.leaf(names::kGraspOutB));
    out.score = t.sigmoid(t.slice_cols(go, 0, 1));
    out.a_raw = t.slice_cols(go, 1, 4);
    out.b_raw = t.slice_cols(go, 4, 7);
  }
  return out;
}

// --- single-point convenience wrappers ---

struct RadianceOutput {
  double sigma = 0.0;
  Vec3 color{0, 0, 0};
};

struct GraspOutput {
  double score = 0.0;
  Vec3 a{0, 0, 0};
  Vec3 b_hat{0, 0, 0};
};

inline RadianceOutput radiance_forward(const ParameterStore& p, const NetworkConfig& c,
                                       const LatentCode& latent, const Vec3& p_obj,
                                       const Vec3& dir_obj) {
  latent.validate(c.latent_dim);
  const Tensor enc_p = encode_positions({p_obj}, c.pos_freqs, c.include_input, c.coord_scale);
  const Tensor enc_d = encode_positions({dir_obj}, c.dir_freqs, c.include_input, 1.0);
  Tensor lat(1, c.latent_dim);
  for (int i = 0; i < c.latent_dim; ++i) lat.v[size_t(i)] = latent.values[size_t(i)];
  const FieldOutputs o = field_forward(p, c, enc_p, lat, &enc_d, true, false);
  return {o.sigma.v[0], Vec3{o.color.v[0], o.color.v[1], o.color.v[2]}};
}

inline double density_forward(const ParameterStore& p, const NetworkConfig& c,
                              const LatentCode& latent, const Vec3& p_obj) {
  latent.validate(c.latent_dim);
  const Tensor enc_p = encode_positions({p_obj}, c.pos_freqs, c.include_input, c.coord_scale);
  Tensor lat(1, c.latent_dim);
  for (int i = 0; i < c.latent_dim; ++i) lat.v[size_t(i)] = latent.values[size_t(i)];
  return field_forward(p, c, enc_p, lat, nullptr, false, false).sigma.v[0];
}

inline GraspOutput grasp_forward(const ParameterStore& p, const NetworkConfig& c,
                                 const LatentCode& latent, const Vec3& p_obj) {
  latent.validate(c.latent_dim);
  const Tensor enc_p = encode_positions({p_obj}, c.pos_freqs, c.include_input, c.coord_scale);
  Tensor lat(1, c.latent_dim);
  for (int i = 0; i < c.latent_dim; ++i) lat.v[size_t(i)] = latent.values[size_t(i)];
  const FieldOutputs o = field_forward(p, c, enc_p, lat, nullptr, false, true);
  return {o.score.v[0], Vec3{o.a_raw.v[0], o.a_raw.v[1], o.a_raw.v[2]},
          Vec3{o.b_raw.v[0], o.b_raw.v[1], o.b_raw.v[2]}};
}

// --- checkpoints ---

struct Checkpoint {
  NetworkConfig config;
  ParameterStore params;

  int num_latents() const {
    const int i = params.find(names::kLatents);
    return i < 0 ? 0 : params.entries[size_t(i)].value.rows;
  }

  LatentCode latent_row(int row) const {
    const Tensor& tab = params.at(names::kLatents).value;
    if (row < 0 || row >= tab.rows) throw std::out_of_range("latent row out of range");
    LatentCode l;
    l.values.assign(tab.row_ptr(row), tab.row_ptr(row) + tab.cols);
    return l;
  }
};

inline Checkpoint make_checkpoint(const NetworkConfig& c, int num_latents, uint64_t seed) {
  return {c, init_params(c, num_latents, seed)};
}

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

inline void put_f64(std::vector<uint8_t>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(bits >> (8 * i)));
}

struct ByteReader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;

  uint32_t u32() {
    if (pos + 4 > b.size()) throw std::runtime_error("truncated checkpoint");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }

  double f64() {
    if (pos + 8 > b.size()) throw std::runtime_error("truncated checkpoint");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[pos + i]) << (8 * i);
    pos += 8;
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }

  std::string str() {
    const uint32_t n = u32();
    if (pos + n > b.size()) throw std::runtime_error("truncated checkpoint");
    std::string s(reinterpret_cast<const char*>(&b[pos]), n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  using namespace detail;
  std::vector<uint8_t> out = {'S', 'F', 'C', 'K'};
  put_u32(out, 1);  // version
  const NetworkConfig& c = ck.config;
  put_u32(out, uint32_t(c.latent_dim));
  put_u32(out, uint32_t(c.trunk_width));
  put_u32(out, uint32_t(c.color_hidden));
  put_u32(out, uint32_t(c.grasp_hidden));
  put_u32(out, uint32_t(c.grasp_hidden_layers));
  put_u32(out, uint32_t(c.pos_freqs));
  put_u32(out, uint32_t(c.dir_freqs));
  put_u32(out, c.include_input ? 1 : 0);
  put_f64(out, c.coord_scale);
  put_u32(out, uint32_t(ck.params.entries.size()));
  for (const auto& e : ck.params.entries) {
    put_u32(out, uint32_t(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, uint32_t(e.value.rows));
    put_u32(out, uint32_t(e.value.cols));
    for (const double x : e.value.v) {
      const float f = float(x);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::vector<uint8_t> bytes(size_t(f.tellg()));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "SFCK", 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  detail::ByteReader r{bytes, 4};
  if (r.u32() != 1) throw std::runtime_error("unsupported checkpoint version");
  Checkpoint ck;
  NetworkConfig& c = ck.config;
  c.latent_dim = int(r.u32());
  c.trunk_width = int(r.u32());
  c.color_hidden = int(r.u32());
  c.grasp_hidden = int(r.u32());
  c.grasp_hidden_layers = int(r.u32());
  c.pos_freqs = int(r.u32());
  c.dir_freqs = int(r.u32());
  c.include_input = r.u32() != 0;
  c.coord_scale = r.f64();
  const uint32_t num_entries = r.u32();
  for (uint32_t i = 0; i < num_entries; ++i) {
    const std::string name = r.str();
    const int rows = int(r.u32());
    const int cols = int(r.u32());
    const int id = ck.params.add(name, rows, cols);
    Tensor& t = ck.params.entries[size_t(id)].value;
    for (double& x : t.v) {
      const uint32_t bits = r.u32();
      float fv;
      std::memcpy(&fv, &bits, 4);
      x = double(fv);
    }
  }
  return ck;
}

}  // namespace scenefield
