#include "flowid/extractors.hpp"

#include <cmath>

#include "flowid/error.hpp"
#include "flowid/rng.hpp"

namespace flowid {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(n >= 1 && m >= 1, "n and m must be >= 1");
  require(length_norm > 0, "length_norm must be positive");
  require(extractor_dim >= 1 && fusion_hidden >= 1 && lstm_hidden >= 1 && gcn_hidden >= 1,
          "extractor widths must be >= 1");
  require(cnn_channels1 >= 1 && cnn_channels2 >= 1, "CNN channel counts must be >= 1");
  require(kernel >= 1 && stride >= 1 && pool >= 1, "kernel, stride and pool must be >= 1");
  const std::size_t l1 = n * m + 2 * padding >= kernel
                              ? (n * m + 2 * padding - kernel) / stride + 1
                              : 0;
  const std::size_t p1 = l1 / pool;
  const std::size_t l2 = p1 + 2 * padding >= kernel ? (p1 + 2 * padding - kernel) / stride + 1 : 0;
  require(l1 >= 1 && p1 >= 1 && l2 / pool >= 1, "payload stream too short for the CNN geometry");
  require(k >= 1, "K must be >= 1");
  require(hidden >= 1, "hidden width must be >= 1");
  require(dropout >= 0 && dropout < 1, "dropout must be in [0, 1)");
  require(classes >= 2, "at least two classes are required");
}

void register_extractor_params(ParameterStore& store, const ModelConfig& c, Rng& rng) {
  c.validate();
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
    store.add(name, glorot_uniform({in, out}, in, out, rng));
  };
  auto bias = [&](const std::string& name, std::size_t width) {
    store.add(name, Tensor::matrix(1, width));
  };
  const std::size_t h = c.lstm_hidden;
  weight("extractor.lstm.w_ih", 1, 4 * h);
  weight("extractor.lstm.w_hh", h, 4 * h);
  Tensor lstm_bias = Tensor::matrix(1, 4 * h);
  for (std::size_t j = h; j < 2 * h; ++j) lstm_bias[j] = 1.0;
  store.add("extractor.lstm.b", std::move(lstm_bias));
  weight("extractor.lstm.att.w", h, h);
  bias("extractor.lstm.att.b", h);
  weight("extractor.lstm.att.v", h, 1);
  weight("extractor.lstm.out.w", h, c.extractor_dim);
  bias("extractor.lstm.out.b", c.extractor_dim);

  const std::size_t c1 = c.cnn_channels1, c2 = c.cnn_channels2;
  store.add("extractor.cnn.conv1.k", glorot_uniform({c1, 1, c.kernel}, c.kernel, c1 * c.kernel, rng));
  bias("extractor.cnn.conv1.b", c1);
  store.add("extractor.cnn.conv2.k",
            glorot_uniform({c2, c1, c.kernel}, c1 * c.kernel, c2 * c.kernel, rng));
  bias("extractor.cnn.conv2.b", c2);
  weight("extractor.cnn.att.w", c2, c2);
  bias("extractor.cnn.att.b", c2);
  weight("extractor.cnn.att.v", c2, 1);
  weight("extractor.cnn.out.w", c2, c.extractor_dim);
  bias("extractor.cnn.out.b", c.extractor_dim);

  weight("extractor.gcn.w1", 2, c.gcn_hidden);
  weight("extractor.gcn.w2", c.gcn_hidden, c.gcn_hidden);
  weight("extractor.gcn.out.w", c.gcn_hidden, c.extractor_dim);
  bias("extractor.gcn.out.b", c.extractor_dim);

  weight("extractor.fuse.l1.w", 2 * c.extractor_dim, c.fusion_hidden);
  bias("extractor.fuse.l1.b", c.fusion_hidden);
  weight("extractor.fuse.l2.w", c.fusion_hidden, c.extractor_dim);
  bias("extractor.fuse.l2.b", c.extractor_dim);
  store.add("extractor.alpha", Tensor::scalar(0.5));
}

namespace {

Var out_linear(Tape& tape, const ParameterStore& store, Var pooled, const std::string& prefix) {
  return ad::linear(pooled, tape.param(store, prefix + ".out.w"), tape.param(store, prefix + ".out.b"));
}

}  // namespace

Var temporal_encode(Tape& tape, const ParameterStore& store, const Tensor& lengths,
                    const ModelConfig& c) {
  if (lengths.rank() != 2 || lengths.cols() != c.n)
    throw ShapeError("temporal_encode: expected N×" + std::to_string(c.n) + " lengths, got " +
                     shape_string(lengths.shape()));
  const double scale = 1.0 / c.length_norm;
  Var pooled = ad::map_rows(tape, store, lengths.rows(), [&](Tape& t, std::size_t i) {
    Tensor x = Tensor::matrix(c.n, 1);
    for (std::size_t s = 0; s < c.n; ++s) x[s] = lengths(i, s) * scale;
    Var states = ad::lstm(t.constant(std::move(x)), t.param(store, "extractor.lstm.w_ih"),
                          t.param(store, "extractor.lstm.w_hh"), t.param(store, "extractor.lstm.b"));
    return ad::attention_pool(states, t.param(store, "extractor.lstm.att.w"),
                              t.param(store, "extractor.lstm.att.b"),
                              t.param(store, "extractor.lstm.att.v"));
  });
  return out_linear(tape, store, pooled, "extractor.lstm");
}

Var payload_encode(Tape& tape, const ParameterStore& store, const Tensor& payloads,
                   const ModelConfig& c) {
  if (payloads.rank() != 3 || payloads.shape()[1] != c.n || payloads.shape()[2] != c.m)
    throw ShapeError("payload_encode: expected N×" + std::to_string(c.n) + "×" +
                     std::to_string(c.m) + " payloads, got " + shape_string(payloads.shape()));
  const std::size_t stream = c.n * c.m;
  Var pooled = ad::map_rows(tape, store, payloads.rows(), [&](Tape& t, std::size_t i) {
    Tensor x = Tensor::matrix(1, stream);
    const double* src = payloads.data() + i * stream;
    for (std::size_t s = 0; s < stream; ++s) x[s] = src[s] / 255.0;
    Var h = ad::conv1d(t.constant(std::move(x)), t.param(store, "extractor.cnn.conv1.k"), c.stride,
                       c.padding);
    h = ad::maxpool1d(ad::relu(ad::add_channel_bias(h, t.param(store, "extractor.cnn.conv1.b"))),
                      c.pool);
    h = ad::conv1d(h, t.param(store, "extractor.cnn.conv2.k"), c.stride, c.padding);
    h = ad::maxpool1d(ad::relu(ad::add_channel_bias(h, t.param(store, "extractor.cnn.conv2.b"))),
                      c.pool);
    return ad::attention_pool(ad::transpose(h), t.param(store, "extractor.cnn.att.w"),
                              t.param(store, "extractor.cnn.att.b"),
                              t.param(store, "extractor.cnn.att.v"));
  });
  return out_linear(tape, store, pooled, "extractor.cnn");
}

Tensor normalized_adjacency(const Tig& tig) {
  const std::size_t n = tig.node_count;
  Tensor a = Tensor::matrix(n, n);
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 1.0;
    for (std::size_t j = 0; j < n; ++j) degree += tig.adjacent(i, j) ? 1.0 : 0.0;
    inv_sqrt[i] = 1.0 / std::sqrt(degree);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i == j || tig.adjacent(i, j)) a(i, j) = inv_sqrt[i] * inv_sqrt[j];
  return a;
}

Tensor tig_features(const Tig& tig, double length_norm) {
  Tensor x = Tensor::matrix(tig.node_count, 2);
  for (std::size_t i = 0; i < tig.node_count; ++i) {
    x(i, 0) = tig.features[i].first / length_norm;
    x(i, 1) = tig.features[i].second;
  }
  return x;
}

Var interaction_encode(Tape& tape, const ParameterStore& store, const std::vector<Tig>& tigs,
                       const ModelConfig& c) {
  Var pooled = ad::map_rows(tape, store, tigs.size(), [&](Tape& t, std::size_t i) {
    if (tigs[i].node_count == 0) throw ShapeError("interaction_encode: empty TIG");
    Var adj = t.constant(normalized_adjacency(tigs[i]));
    Var x = t.constant(tig_features(tigs[i], c.length_norm));
    Var h = ad::relu(ad::matmul(adj, ad::matmul(x, t.param(store, "extractor.gcn.w1"))));
    h = ad::relu(ad::matmul(adj, ad::matmul(h, t.param(store, "extractor.gcn.w2"))));
    return ad::mean_rows(h);
  });
  return out_linear(tape, store, pooled, "extractor.gcn");
}

void fuse(Tape& tape, const ParameterStore& store, ViewEmbeddingVars& z, const ModelConfig& c,
          Mode mode, Rng& rng) {
  Var h = ad::linear(ad::concat_cols(z.z_cnn, z.z_lstm), tape.param(store, "extractor.fuse.l1.w"),
                     tape.param(store, "extractor.fuse.l1.b"));
  if (mode == Mode::Train && c.dropout > 0) h = ad::mul_const(h, dropout_mask(h.value().shape(), c.dropout, rng));
  z.z_seq = ad::linear(h, tape.param(store, "extractor.fuse.l2.w"),
                       tape.param(store, "extractor.fuse.l2.b"));
  z.z_mv = ad::interpolate(tape.param(store, "extractor.alpha"), z.z_gcn, z.z_seq);
}

ViewEmbeddingVars extract(Tape& tape, const ParameterStore& store, const ViewBatch& batch,
                          const ModelConfig& c, Mode mode, Rng& rng) {
  if (batch.size() == 0) throw ShapeError("extract: empty view batch");
  if (batch.n != c.n || batch.m != c.m)
    throw ShapeError("extract: view batch built with n=" + std::to_string(batch.n) +
                     ", m=" + std::to_string(batch.m) + " but model expects n=" +
                     std::to_string(c.n) + ", m=" + std::to_string(c.m));
  ViewEmbeddingVars z;
  z.z_lstm = temporal_encode(tape, store, batch.lengths, c);
  z.z_cnn = payload_encode(tape, store, batch.payloads, c);
  z.z_gcn = interaction_encode(tape, store, batch.tigs, c);
  fuse(tape, store, z, c, mode, rng);
  return z;
}

Tensor extract_features(const ParameterStore& store, const ViewBatch& batch,
                        const ModelConfig& config) {
  Tape tape;
  tape.freeze_prefix("");
  Rng unused(0);
  return extract(tape, store, batch, config, Mode::Infer, unused).z_mv.value();
}

}  // namespace flowid
