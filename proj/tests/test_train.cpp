#include "test_main.hpp"

#include <cmath>

#include "ntssl/error.hpp"
#include "ntssl/synthgen.hpp"
#include "ntssl/train.hpp"

using namespace ntssl;

namespace {

TrackletDataset small_data(std::size_t d_in = 6) {
  SynthConfig s;
  s.num_videos = 3;
  s.polyps_per_video = 3;
  s.d_in = d_in;
  s.seed = 4;
  return generate_dataset(s);
}

EncoderConfig small_encoder(std::size_t d_in = 6) {
  EncoderConfig e;
  e.d_in = d_in;
  e.d_model = 8;
  e.num_heads = 2;
  e.d_ff = 16;
  e.proj_hidden = 32;  // narrow ReLU heads can zero a whole row
  e.proj_out = 4;
  e.L = 8;
  return e;
}

TrainConfig small_train(std::size_t steps) {
  TrainConfig t;
  t.total_steps = steps;
  t.batch_size = 6;
  t.K = 2;
  t.lr = 1e-3;
  return t;
}

}  // namespace

TEST_CASE("curriculum progress spans [0, 1]") {
  CHECK(curriculum_progress(0, 1) == 0.0);
  CHECK(curriculum_progress(0, 2) == 0.0);
  CHECK(curriculum_progress(1, 2) == 1.0);
  CHECK(curriculum_progress(5, 11) == 0.5);
  CHECK(curriculum_progress(20, 11) == 1.0);
}

TEST_CASE("a single step runs at the coldest temperature") {
  const TrackletDataset ds = small_data();
  const TrainResult r = train(ds, small_encoder(), LossConfig{}, small_train(1));
  REQUIRE(r.log.size() == 1);
  CHECK(r.log[0].c == 0.0);
  CHECK(r.log[0].tau == 0.3);
  CHECK(std::isfinite(r.log[0].loss_total));
  CHECK(r.log[0].loss_tracklet.has_value());
  CHECK(r.log[0].loss_frame.has_value());
  CHECK(r.log[0].purity.has_value());
}

TEST_CASE("logged temperature follows the schedule, or stays fixed without curriculum") {
  const TrackletDataset ds = small_data();
  TrainConfig t = small_train(7);
  const TrainResult r = train(ds, small_encoder(), LossConfig{}, t);
  for (const StepRecord& rec : r.log) {
    CHECK(rec.c == curriculum_progress(rec.step, 7));
    CHECK(rec.tau == curriculum_tau(t.schedule, rec.c));
  }
  CHECK(r.log.back().c == 1.0);
  CHECK(r.log.back().tau == doctest::Approx(12.0).epsilon(1e-12));

  t.curriculum = false;
  t.sampling = Sampling::topk;
  for (const StepRecord& rec : train(ds, small_encoder(), LossConfig{}, t).log) CHECK(rec.tau == t.fixed_tau);
}

TEST_CASE("zero learning rate leaves the initial weights untouched") {
  const TrackletDataset ds = small_data();
  TrainConfig t = small_train(3);
  t.lr = 0.0;
  const TrainResult r = train(ds, small_encoder(), LossConfig{}, t);
  CHECK(r.checkpoint.params == initial_checkpoint(small_encoder(), t).params);
  t.lr = 1e-3;
  CHECK_FALSE(train(ds, small_encoder(), LossConfig{}, t).checkpoint.params == r.checkpoint.params);
}

TEST_CASE("training is deterministic per seed") {
  const TrackletDataset ds = small_data();
  TrainConfig t = small_train(4);
  const TrainResult a = train(ds, small_encoder(), LossConfig{}, t);
  const TrainResult b = train(ds, small_encoder(), LossConfig{}, t);
  CHECK(a.checkpoint.params == b.checkpoint.params);
  CHECK(a.log == b.log);
  CHECK(step_log_csv(a.log) == step_log_csv(b.log));
  t.seed = 1;
  CHECK_FALSE(train(ds, small_encoder(), LossConfig{}, t).log == a.log);
}

TEST_CASE("level selects which loss columns are logged") {
  const TrackletDataset ds = small_data();
  LossConfig l;
  l.level = Level::tracklet;
  const StepRecord a = train(ds, small_encoder(), l, small_train(1)).log[0];
  CHECK(a.loss_tracklet.has_value());
  CHECK_FALSE(a.loss_frame.has_value());
  CHECK(a.loss_total == doctest::Approx(*a.loss_tracklet).epsilon(1e-14));
  l.level = Level::frame;
  const StepRecord b = train(ds, small_encoder(), l, small_train(1)).log[0];
  CHECK_FALSE(b.loss_tracklet.has_value());
  CHECK(b.loss_total == doctest::Approx(*b.loss_frame).epsilon(1e-14));
}

TEST_CASE("purity is logged only with identities") {
  const TrackletDataset ds = small_data();
  std::vector<Tracklet> recs(ds.records().begin(), ds.records().end());
  recs[0].polyp_id.reset();
  const TrackletDataset unlabelled(std::move(recs), ds.L(), ds.d_in());
  const StepRecord r = train(unlabelled, small_encoder(), LossConfig{}, small_train(1)).log[0];
  CHECK_FALSE(r.purity.has_value());
}

TEST_CASE("step log csv layout") {
  StepRecord a;
  a.step = 0;
  a.c = 0;
  a.tau = 0.3;
  a.loss_total = 1.5;
  a.loss_tracklet = 1.5;
  const std::string csv = step_log_csv(std::vector<StepRecord>{a});
  CHECK(csv == "step,c,tau,loss_total,loss_tracklet,loss_frame,purity\n0,0,0.29999999999999999,1.5,1.5,,\n");
}

TEST_CASE("embeddings have the projected shape and reject mismatched data") {
  const TrackletDataset ds = small_data();
  Checkpoint ck = initial_checkpoint(small_encoder(), small_train(1));
  const EmbeddingSet e = embed_all(ds, ck);
  CHECK(e.tracklet_emb.shape() == std::vector<std::size_t>{ds.size(), 4});
  CHECK(e.frame_embs.shape() == std::vector<std::size_t>{ds.size(), 8, 4});
  CHECK(e.size() == ds.size());
  // Row 0 agrees with the single-tracklet path.
  const Tensor z = project(encode(ds.features(0), ck.params, ck.encoder).tracklet_hidden, ck.params, ck.encoder);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(e.tracklet_emb(0, j) - z[j]) < 1e-12);

  const TrackletDataset wide = small_data(7);
  CHECK_THROWS_WITH_AS(embed_all(wide, ck), doctest::Contains("config mismatch"), MismatchError);
  CHECK_THROWS_AS(train(wide, small_encoder(), LossConfig{}, small_train(1)), MismatchError);
}

TEST_CASE("training input validation") {
  const TrackletDataset ds = small_data();
  TrainConfig t = small_train(1);
  t.K = 1000;
  CHECK_THROWS_WITH_AS(train(ds, small_encoder(), LossConfig{}, t), doctest::Contains("no usable anchors"), UsageError);
  t = small_train(1);
  t.batch_size = 1;
  CHECK_THROWS_AS(train(ds, small_encoder(), LossConfig{}, t), UsageError);
  t = small_train(0);
  CHECK_THROWS_AS(t.validate(), UsageError);
  CHECK(parse_sampling("topk") == Sampling::topk);
  CHECK_THROWS_AS(parse_sampling("uniform"), UsageError);
}

TEST_CASE("the loss moving average falls over a short run") {
  const TrackletDataset ds = small_data();
  TrainConfig t = small_train(400);
  const TrainResult r = train(ds, small_encoder(), LossConfig{}, t);
  auto window_mean = [&](std::size_t begin) {
    double s = 0;
    for (std::size_t i = begin; i < begin + 100; ++i) s += r.log[i].loss_total;
    return s / 100;
  };
  const double first = window_mean(0), last = window_mean(300);
  INFO("first 100 steps ", first, ", last 100 steps ", last);
  CHECK(last < first);
}
