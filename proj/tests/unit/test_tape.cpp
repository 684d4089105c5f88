#include <doctest.h>

#include <functional>
#include <memory>

#include "scenefield/rng.hpp"
#include "scenefield/tape.hpp"

using namespace scenefield;

namespace {

Tensor random_tensor(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

double eval_scalar(ParameterStore& params, const std::function<int(Tape&)>& build) {
  Tape t(&params);
  return t.val(build(t)).v[0];
}

// Central finite differences vs tape gradients for every trainable entry.
void check_grads(ParameterStore& params, const std::function<int(Tape&)>& build,
                 double tol = 1e-6, double h = 1e-5) {
  Tape tape(&params);
  const int loss = build(tape);
  tape.backward(loss);
  for (auto& e : params.entries) {
    if (!e.trainable) continue;
    const Tensor g = tape.param_grad(e.name);
    for (size_t i = 0; i < e.value.size(); ++i) {
      const double saved = e.value.v[i];
      e.value.v[i] = saved + h;
      const double up = eval_scalar(params, build);
      e.value.v[i] = saved - h;
      const double down = eval_scalar(params, build);
      e.value.v[i] = saved;
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(g.v[i] - fd) / std::max({1.0, std::abs(g.v[i]), std::abs(fd)});
      CHECK(err < tol);
    }
  }
}

}  // namespace

TEST_CASE("analytic scalar derivatives") {
  ParameterStore params;
  params.add("x", 1, 1);
  params.at("x").value.v[0] = 3.0;
  Tape t(&params);
  const int loss = t.square(t.leaf("x"));
  t.backward(loss);
  CHECK(t.param_grad("x").v[0] == doctest::Approx(6.0));

  params.at("x").value.v[0] = -2.0;
  Tape t2(&params);
  const int loss2 = t2.relu(t2.leaf("x"));
  t2.backward(loss2);
  CHECK(t2.param_grad("x").v[0] == 0.0);
}

TEST_CASE("backward requires a scalar loss") {
  ParameterStore params;
  params.add("m", 2, 3);
  Tape t(&params);
  const int node = t.leaf("m");
  CHECK_THROWS_AS(t.backward(node), std::invalid_argument);
}

TEST_CASE("untouched parameters report zero gradients") {
  ParameterStore params;
  params.add("used", 1, 1);
  params.add("unused", 2, 2);
  params.at("used").value.v[0] = 1.5;
  Tape t(&params);
  const int loss = t.square(t.leaf("used"));
  t.backward(loss);
  const Tensor g = t.param_grad("unused");
  for (const double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("elementwise and matmul ops match finite differences") {
  Rng rng(21);
  ParameterStore params;
  params.add("a", 3, 4);
  params.add("b", 3, 4);
  params.add("w", 4, 2);
  params.at("a").value = random_tensor(3, 4, rng);
  params.at("b").value = random_tensor(3, 4, rng, 0.1, 1.0);
  params.at("w").value = random_tensor(4, 2, rng);

  check_grads(params, [](Tape& t) {
    const int a = t.leaf("a");
    const int b = t.leaf("b");
    const int mixed = t.add(t.mul(a, b), t.scale(t.sub(a, b), 0.7));
    const int mm = t.matmul(t.sigmoid(mixed), t.leaf("w"));
    return t.mean_all(t.square(mm));
  });
}

TEST_CASE("transcendental ops match finite differences") {
  Rng rng(22);
  ParameterStore params;
  params.add("a", 2, 5);
  params.at("a").value = random_tensor(2, 5, rng);
  check_grads(params, [](Tape& t) {
    const int a = t.leaf("a");
    const int s = t.add(t.sin(a), t.cos(t.scale(a, 1.3)));
    const int e = t.exp(t.scale(a, 0.5));
    return t.sum_all(t.add(t.softplus(s), t.mul(e, t.sigmoid(a))));
  });
}

TEST_CASE("relu gradient away from the kink") {
  Rng rng(23);
  ParameterStore params;
  params.add("a", 4, 4);
  params.at("a").value = random_tensor(4, 4, rng);
  // keep values away from zero so finite differences are valid
  for (double& v : params.at("a").value.v)
    if (std::abs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
  check_grads(params, [](Tape& t) { return t.mean_all(t.relu(t.leaf("a"))); });
}

TEST_CASE("concat, slice, bias and embed match finite differences") {
  Rng rng(24);
  ParameterStore params;
  params.add("a", 3, 2);
  params.add("b", 3, 3);
  params.add("bias", 1, 5);
  params.add("table", 4, 3);
  params.at("a").value = random_tensor(3, 2, rng);
  params.at("b").value = random_tensor(3, 3, rng);
  params.at("bias").value = random_tensor(1, 5, rng);
  params.at("table").value = random_tensor(4, 3, rng);

  check_grads(params, [](Tape& t) {
    const int cat = t.concat_cols(t.leaf("a"), t.leaf("b"));
    const int biased = t.add_bias(cat, t.leaf("bias"));
    const int sl = t.slice_cols(biased, 1, 4);
    const int emb = t.embed(t.leaf("table"), {2, 0, 2});  // repeated row exercises scatter
    return t.mean_all(t.square(t.mul(sl, emb)));
  });
}

TEST_CASE("rotation assembly ops match finite differences") {
  Rng rng(25);
  ParameterStore params;
  params.add("a", 5, 3);
  params.add("b", 5, 3);
  params.at("a").value = random_tensor(5, 3, rng, 0.3, 1.0);
  params.at("b").value = random_tensor(5, 3, rng, -1.0, -0.3);

  check_grads(params, [](Tape& t) {
    const int an = t.row_normalize(t.leaf("a"));
    const int u = t.cross3(an, t.leaf("b"));
    const int bn = t.row_normalize(t.cross3(u, an));
    const int mid = t.cross3(an, bn);
    return t.mean_all(t.square(t.concat_cols(t.concat_cols(bn, mid), an)));
  });
}

TEST_CASE("composite op matches finite differences") {
  Rng rng(26);
  ParameterStore params;
  params.add("sigma_raw", 6, 1);
  params.add("color_raw", 6, 3);
  params.at("sigma_raw").value = random_tensor(6, 1, rng, -1.0, 2.0);
  params.at("color_raw").value = random_tensor(6, 3, rng);

  auto build = [](Tape& t) {
    auto aux = std::make_shared<CompositeAux>();
    aux->num_rays = 2;
    aux->samples_per_ray = 3;
    aux->delta = {0.4, 0.3, 0.5, 0.2, 0.6, 0.1};
    aux->background[0] = 0.9;
    aux->background[1] = 0.1;
    aux->background[2] = 0.4;
    const int sigma = t.softplus(t.leaf("sigma_raw"));
    const int color = t.sigmoid(t.leaf("color_raw"));
    return t.mean_all(t.square(t.composite(sigma, color, std::move(aux))));
  };
  check_grads(params, build);
}

TEST_CASE("two-layer mlp end to end matches finite differences") {
  Rng rng(27);
  ParameterStore params;
  params.add("w1", 6, 8);
  params.add("b1", 1, 8);
  params.add("w2", 8, 3);
  params.add("b2", 1, 3);
  params.add("x", 4, 6);
  for (auto& e : params.entries) e.value = random_tensor(e.value.rows, e.value.cols, rng);

  check_grads(params, [](Tape& t) {
    const int h = t.relu(t.add_bias(t.matmul(t.leaf("x"), t.leaf("w1")), t.leaf("b1")));
    const int y = t.add_bias(t.matmul(h, t.leaf("w2")), t.leaf("b2"));
    return t.mean_all(t.square(t.sigmoid(y)));
  });
}

TEST_CASE("gradients only flow through trainable leaves") {
  Rng rng(28);
  ParameterStore params;
  params.add("w", 3, 3);
  params.add("frozen", 3, 3);
  params.at("w").value = random_tensor(3, 3, rng);
  params.at("frozen").value = random_tensor(3, 3, rng);
  params.at("frozen").trainable = false;

  Tape t(&params);
  const int loss = t.mean_all(t.square(t.matmul(t.leaf("w"), t.leaf("frozen"))));
  t.backward(loss);
  const Tensor gw = t.param_grad("w");
  bool any = false;
  for (const double v : gw.v) any = any || v != 0.0;
  CHECK(any);
  const Tensor gf = t.param_grad("frozen");
  for (const double v : gf.v) CHECK(v == 0.0);
}

TEST_CASE("matmul results are identical for any thread count") {
  Rng rng(29);
  Tensor a = random_tensor(64, 37, rng);
  Tensor b = random_tensor(37, 29, rng);
  Tensor c1(64, 29), c4(64, 29);
  set_num_threads(1);
  kernels::matmul(c1, a, b);
  set_num_threads(4);
  kernels::matmul(c4, a, b);
  set_num_threads(1);
  CHECK(c1.v == c4.v);
}
