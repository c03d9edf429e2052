#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "mvc/errors.hpp"
#include "mvc/gradcheck.hpp"
#include "mvc/model.hpp"

using namespace mvc;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.view_dims = {3, 5};
  c.latent_dim = 2;
  c.clusters = 3;
  c.hidden = {4};
  return c;
}

Tensor filled(std::size_t r, std::size_t c, double start, double step) {
  Tensor t = Tensor::zeros(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = start + step * static_cast<double>(i);
  return t;
}

}  // namespace

TEST_CASE("model shapes and parameter names") {
  Rng rng(1);
  MultiViewVae model(small_config(), rng);
  const auto& p = model.params();
  CHECK(p.find("enc0.l0.W"));
  CHECK(p.find("enc1.mu.W"));
  CHECK(p.find("enc1.logvar.b"));
  CHECK(p.find("dec0.out.W"));
  CHECK(p.find("head1.means"));
  CHECK(p[*p.find("enc1.l0.W")].shape() == std::vector<std::size_t>{5, 4});
  CHECK(p[*p.find("dec1.l0.W")].shape() == std::vector<std::size_t>{4, 4});
  CHECK(p[*p.find("dec1.out.W")].shape() == std::vector<std::size_t>{4, 5});
  CHECK(p[*p.find("head0.W")].shape() == std::vector<std::size_t>{2, 3});
  CHECK(p[*p.find("head0.means")].shape() == std::vector<std::size_t>{3, 4});

  Tape tape;
  auto params = tape.parameters(p.tensors());
  std::vector<Var> inputs = {tape.constant(filled(6, 3, -1, 0.1)), tape.constant(filled(6, 5, 0.5, -0.05))};
  std::vector<Var> noise = {tape.constant(Tensor::zeros(6, 2)), tape.constant(Tensor::zeros(6, 2))};
  LatentPass pass = model.encode_views(inputs, params, noise);
  CHECK(pass.mu[1].rows() == 6);
  CHECK(pass.mu[1].cols() == 2);
  CHECK(pass.z_global.cols() == 4);
  Var x1 = decode(pass.z_global, model.decoder(1), params);
  CHECK(x1.rows() == 6);
  CHECK(x1.cols() == 5);
  // Zero noise gives z = mu.
  CHECK(pass.z_global.value() == pass.mu_global.value());
}

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.clusters = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.shared_backbone = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.view_dims = {3, 3};
  CHECK_NOTHROW(c.validate());
  Rng rng(2);
  MultiViewVae shared(c, rng);
  c.shared_backbone = false;
  MultiViewVae separate(c, rng);
  CHECK(shared.params().scalar_count() < separate.params().scalar_count());
  CHECK(shared.params().find("enc.l0.W"));
}

TEST_CASE("encode examples") {
  ModelConfig c = small_config();
  Rng rng(3);
  MultiViewVae model(c, rng);
  SUBCASE("zero network gives zero mean and log-variance") {
    for (auto& t : model.params().tensors()) t.matrix().setZero();
    Tape tape;
    auto params = tape.parameters(model.params().tensors());
    auto enc = encode(tape.constant(filled(4, 3, 1, 1)), model.encoder(0), params);
    for (double x : enc.mu.value().values()) CHECK(x == 0.0);
    for (double x : enc.logvar.value().values()) CHECK(x == 0.0);
  }
  SUBCASE("log-variance is clamped") {
    model.params()[*model.params().find("enc0.logvar.b")].matrix().setConstant(50.0);
    Tape tape;
    auto params = tape.parameters(model.params().tensors());
    auto enc = encode(tape.constant(filled(2, 3, 0, 0.1)), model.encoder(0), params);
    for (double x : enc.logvar.value().values()) CHECK(x == 10.0);
  }
  SUBCASE("deterministic") {
    Tape a, b;
    auto pa = a.parameters(model.params().tensors());
    auto pb = b.parameters(model.params().tensors());
    auto ea = encode(a.constant(filled(2, 3, 0, 0.3)), model.encoder(0), pa);
    auto eb = encode(b.constant(filled(2, 3, 0, 0.3)), model.encoder(0), pb);
    CHECK(ea.mu.value() == eb.mu.value());
    CHECK(ea.logvar.value() == eb.logvar.value());
  }
  SUBCASE("dimension mismatch") {
    Tape tape;
    auto params = tape.parameters(model.params().tensors());
    CHECK_THROWS_AS(encode(tape.constant(Tensor::zeros(2, 4)), model.encoder(0), params), DimensionError);
  }
}

TEST_CASE("reparameterize examples") {
  Tape tape;
  auto z = [&](double mu, double logvar, double eps) {
    return reparameterize(tape.constant(Tensor::scalar(mu)), tape.constant(Tensor::scalar(logvar)),
                          tape.constant(Tensor::scalar(eps)))
        .value()[0];
  };
  CHECK(z(0, 0, 0.5) == 0.5);
  CHECK(z(2, 7.3, 0) == 2.0);
  CHECK(z(1, std::log(4.0), 1) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(reparameterize(tape.constant(Tensor::zeros(1, 2)), tape.constant(Tensor::zeros(1, 2)),
                                 tape.constant(Tensor::zeros(1, 3))),
                  DimensionError);
}

TEST_CASE("reparameterization statistics") {
  const double mu = 0.7, logvar = -0.4;
  const std::size_t n = 100000;
  Rng rng(17);
  Tape tape;
  Var zs = reparameterize(tape.constant(Tensor(std::vector<std::size_t>{n, 1}, mu)),
                          tape.constant(Tensor(std::vector<std::size_t>{n, 1}, logvar)),
                          tape.constant(standard_normal(n, 1, rng)));
  double mean = 0.0, sq = 0.0;
  for (double x : zs.value().values()) mean += x;
  mean /= static_cast<double>(n);
  for (double x : zs.value().values()) sq += (x - mean) * (x - mean);
  const double var = sq / static_cast<double>(n - 1);
  const double sigma = std::exp(0.5 * logvar);
  CHECK(std::abs(mean - mu) < 4 * sigma / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var / std::exp(logvar) - 1.0) < 0.05);
}

TEST_CASE("reparameterization gradients") {
  const double eps = 0.8, logvar = 0.6;
  Tape tape;
  Var mu = tape.parameter(0, Tensor::scalar(0.2));
  Var lv = tape.parameter(1, Tensor::scalar(logvar));
  auto g = tape.backward(reparameterize(mu, lv, tape.constant(Tensor::scalar(eps))));
  CHECK(g.at(0)[0] == 1.0);
  CHECK(g.at(1)[0] == doctest::Approx(0.5 * std::exp(0.5 * logvar) * eps).epsilon(1e-14));
  auto loss = [&](Tape& t, std::span<const Var> p) {
    return sum(reparameterize(p[0], p[1], t.constant(Tensor::scalar(eps))));
  };
  CHECK(finite_difference_check(loss, {Tensor::scalar(0.2), Tensor::scalar(logvar)}, 1e-6).max_rel_error < 1e-6);
}

TEST_CASE("concat_latents examples") {
  Tape tape;
  std::vector<Var> one = {tape.constant(Tensor::from_rows({{1, 2}}))};
  CHECK(concat_latents(one).value() == Tensor::from_rows({{1, 2}}));
  std::vector<Var> two = {tape.constant(Tensor::from_rows({{1, 2}})), tape.constant(Tensor::from_rows({{3, 4}}))};
  CHECK(concat_latents(two).value() == Tensor::from_rows({{1, 2, 3, 4}}));
  std::vector<Var> three = {tape.constant(Tensor::zeros(8, 10)), tape.constant(Tensor::zeros(8, 10)),
                            tape.constant(Tensor::zeros(8, 10))};
  CHECK(concat_latents(three).value().shape() == std::vector<std::size_t>{8, 30});
  std::vector<Var> ragged = {tape.constant(Tensor::zeros(8, 10)), tape.constant(Tensor::zeros(7, 10))};
  CHECK_THROWS_AS(concat_latents(ragged), DimensionError);
}

TEST_CASE("soft labels") {
  Tape tape;
  SUBCASE("equal logits give the uniform distribution") {
    Var y = softmax_rows(tape.constant(Tensor::from_rows({{2, 2, 2, 2}})));
    for (double p : y.value().values()) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("logits (10, 0, 0)") {
    Var y = softmax_rows(tape.constant(Tensor::from_rows({{10, 0, 0}})));
    CHECK(y.value()[0] == doctest::Approx(1.0 / (1.0 + 2.0 * std::exp(-10.0))).epsilon(1e-15));
    CHECK(y.value()[0] == doctest::Approx(0.99991).epsilon(1e-5));
  }
  SUBCASE("head output is on the simplex") {
    Rng rng(5);
    MultiViewVae model(small_config(), rng);
    auto params = tape.parameters(model.params().tensors());
    Rng data_rng(6);
    Var y = assign_soft_labels(tape.constant(standard_normal(20, 2, data_rng)), model.head(1), params);
    for (std::size_t r = 0; r < 20; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        CHECK(y.value()(r, j) >= 0.0);
        CHECK(y.value()(r, j) <= 1.0);
        total += y.value()(r, j);
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("decode with a zero network returns the bias") {
  Rng rng(7);
  MultiViewVae model(small_config(), rng);
  for (auto& t : model.params().tensors()) t.matrix().setZero();
  auto& out_bias = model.params()[*model.params().find("dec1.out.b")];
  for (std::size_t i = 0; i < out_bias.size(); ++i) out_bias[i] = static_cast<double>(i) - 1.5;
  Tape tape;
  auto params = tape.parameters(model.params().tensors());
  Var x = decode(tape.constant(filled(3, 4, 0.1, 0.2)), model.decoder(1), params);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 5; ++c) CHECK(x.value()(r, c) == static_cast<double>(c) - 1.5);
  }
  CHECK_THROWS_AS(decode(tape.constant(Tensor::zeros(3, 3)), model.decoder(1), params), DimensionError);
}

TEST_CASE("embedding is the noise-free concatenated mean") {
  Rng rng(8);
  MultiViewVae model(small_config(), rng);
  std::vector<Tensor> views = {filled(5, 3, -0.4, 0.07), filled(5, 5, 0.3, -0.02)};
  const Tensor z = model.embed(views, 2);
  Tape tape;
  auto params = tape.parameters(model.params().tensors());
  std::vector<Var> inputs = {tape.constant(views[0]), tape.constant(views[1])};
  std::vector<Var> noise = {tape.constant(Tensor::zeros(5, 2)), tape.constant(Tensor::zeros(5, 2))};
  const Tensor& expected = model.encode_views(inputs, params, noise).mu_global.value();
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == doctest::Approx(expected[i]).epsilon(1e-13));
}

TEST_CASE("initialization is seeded") {
  Rng a(42), b(42), c(43);
  MultiViewVae ma(small_config(), a), mb(small_config(), b), mc(small_config(), c);
  for (std::size_t i = 0; i < ma.params().size(); ++i) CHECK(ma.params()[i] == mb.params()[i]);
  CHECK_FALSE(ma.params()[0] == mc.params()[0]);
}

TEST_CASE("class means") {
  Rng rng(9);
  MultiViewVae model(small_config(), rng);
  Tensor centroids = filled(3, 4, 0, 1);
  model.set_class_means(centroids);
  CHECK(model.params()[model.head(0).class_means] == centroids);
  CHECK(model.params()[model.head(1).class_means] == centroids);
  CHECK_THROWS_AS(model.set_class_means(Tensor::zeros(3, 2)), DimensionError);
}

TEST_CASE("checkpoint round trip and corruption") {
  Rng rng(10);
  MultiViewVae model(small_config(), rng);
  const auto path = (std::filesystem::temp_directory_path() / "mvc_test_model.mvck").string();
  model.save(path);

  Rng other_rng(11);
  MultiViewVae restored(small_config(), other_rng);
  restored.load(path);
  for (std::size_t i = 0; i < model.params().size(); ++i) CHECK(restored.params()[i] == model.params()[i]);

  auto bytes = encode_checkpoint(model.params());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MVCK");
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_checkpoint(std::string_view(bad.data(), bad.size()));
    FAIL("corrupted magic accepted");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  CHECK_THROWS_AS(decode_checkpoint(std::string_view(bytes.data(), bytes.size() - 3)), FormatError);

  ModelConfig wider = small_config();
  wider.hidden = {5};
  Rng w_rng(12);
  MultiViewVae mismatched(wider, w_rng);
  CHECK_THROWS_AS(mismatched.load(path), FormatError);
  std::filesystem::remove(path);
}
