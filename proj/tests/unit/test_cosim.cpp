#include <gtest/gtest.h>

#include <sstream>

#include "cpt/cosim.h"

using namespace cpt::cosim;

namespace {

SimClock day_clock()
{
  return SimClock{9.25 * 3600, 1.0, 0};
}

struct Counter {
  double value = 0.0;
  void step(StepContext& ctx)
  {
    value += 1.0;
    ctx.publish("pv.power", value);
  }
};

}  // namespace

TEST(Scheduler, FirstRegistrationOk)
{
  Scheduler s(day_clock());
  EXPECT_EQ(s.register_simulator({"pv", {}, {"pv.power"}}, [](StepContext&) {}), 0u);
}

TEST(Scheduler, SecondProducerIsRejected)
{
  Scheduler s(day_clock());
  s.register_simulator({"pv", {}, {"pv.power"}}, [](StepContext&) {});
  EXPECT_THROW(s.register_simulator({"pv2", {}, {"pv.power"}}, [](StepContext&) {}),
               RegistrationError);
  EXPECT_THROW(s.register_simulator({"pv", {}, {"other"}}, [](StepContext&) {}),
               RegistrationError);
}

TEST(Scheduler, RegisterAfterStartIsLifecycleError)
{
  Scheduler s(day_clock());
  s.register_simulator({"pv", {}, {"pv.power"}}, [](StepContext&) {});
  s.step_all();
  EXPECT_THROW(s.register_simulator({"late", {}, {}}, [](StepContext&) {}), LifecycleError);
}

TEST(Scheduler, InputWithoutProducerFailsAtStart)
{
  Scheduler s(day_clock());
  s.register_simulator({"meter", {"nobody.writes"}, {}}, [](StepContext&) {});
  EXPECT_THROW(s.step_all(), LifecycleError);
}

TEST(Scheduler, OneRecordPerSignalPerStep)
{
  Scheduler s(day_clock());
  Counter c;
  s.register_simulator({"pv", {}, {"pv.power"}}, [&](StepContext& ctx) { c.step(ctx); });
  double seen = -1.0;
  s.register_simulator({"meter", {"pv.power"}, {}},
                       [&](StepContext& ctx) { seen = ctx.input_value("pv.power", -1.0); });
  auto r0 = s.step_all();
  ASSERT_EQ(r0.size(), 1u);
  EXPECT_EQ(r0[0].signal, "pv.power");
  // Published at k, visible at k+1.
  EXPECT_DOUBLE_EQ(seen, -1.0);
  s.step_all();
  EXPECT_DOUBLE_EQ(seen, 1.0);
}

TEST(Scheduler, OrderDoesNotChangeWhatIsSeen)
{
  for (bool consumer_first : {false, true}) {
    Scheduler s(day_clock());
    Counter c;
    std::vector<double> seen;
    auto producer = [&] {
      s.register_simulator({"pv", {}, {"pv.power"}}, [&](StepContext& ctx) { c.step(ctx); });
    };
    auto consumer = [&] {
      s.register_simulator({"meter", {"pv.power"}, {}},
                           [&](StepContext& ctx) { seen.push_back(ctx.input_value("pv.power")); });
    };
    if (consumer_first) {
      consumer();
      producer();
    } else {
      producer();
      consumer();
    }
    for (int i = 0; i < 4; ++i) s.step_all();
    EXPECT_EQ(seen, (std::vector<double>{0, 1, 2, 3}));
  }
}

TEST(Scheduler, UnpublishedOutputIsExplicitlyEmpty)
{
  Scheduler s(day_clock());
  s.register_simulator({"pv", {}, {"pv.power"}}, [](StepContext&) {});
  auto r = s.step_all();
  ASSERT_EQ(r.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<std::monostate>(r[0].value));
}

TEST(Scheduler, EmptySchedulerStillAdvances)
{
  Scheduler s(day_clock());
  EXPECT_TRUE(s.step_all().empty());
  EXPECT_EQ(s.clock().now, 1);
}

TEST(Scheduler, RelaySeesSameStepValues)
{
  Scheduler s(day_clock());
  s.register_simulator({"a", {}, {"tx.a"}}, [](StepContext& ctx) {
    ctx.publish("tx.a", FrameBatch{{static_cast<std::uint8_t>(ctx.step())}});
  });
  std::vector<std::size_t> relayed;
  s.register_relay({"net", {"tx.a"}, {"rx.b"}}, [&](StepContext& ctx) {
    relayed.push_back(ctx.input_frames("tx.a").size());
    ctx.publish("rx.b", ctx.input_frames("tx.a"));
  });
  std::vector<int> got;
  s.register_simulator({"b", {"rx.b"}, {}}, [&](StepContext& ctx) {
    const auto& f = ctx.input_frames("rx.b");
    got.push_back(f.empty() ? -1 : f[0][0]);
  });
  for (int i = 0; i < 3; ++i) s.step_all();
  EXPECT_EQ(relayed, (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_EQ(got, (std::vector<int>{-1, 0, 1}));  // one-step latency
}

TEST(Scheduler, StepErrorNamesSimulator)
{
  Scheduler s(day_clock());
  s.register_simulator({"bad", {}, {}}, [](StepContext& ctx) {
    if (ctx.step() == 2) throw std::runtime_error("boom");
  });
  try {
    s.run(day_clock().epoch_s + 10);
    FAIL();
  } catch (const StepError& e) {
    EXPECT_EQ(e.simulator(), "bad");
    EXPECT_EQ(e.step(), 2);
  }
}

TEST(Scheduler, UndeclaredSignalsAreRejected)
{
  Scheduler s(day_clock());
  s.register_simulator({"x", {}, {}}, [](StepContext& ctx) { ctx.publish("y", 1.0); });
  EXPECT_THROW(s.step_all(), StepError);
}

TEST(StepArithmetic, Examples)
{
  const double epoch = 9.25 * 3600;
  EXPECT_EQ(Scheduler::steps_between(epoch, epoch + 60, 1.0), 60);
  EXPECT_EQ(Scheduler::steps_between(epoch, epoch, 1.0), 0);
  // 09:15 -> 15:00 is 5 h 45 min = 20700 s.
  EXPECT_EQ(Scheduler::steps_between(epoch, 15.0 * 3600, 1.0), (15 * 60 - (9 * 60 + 15)) * 60);
  EXPECT_EQ(Scheduler::steps_between(epoch, 15.0 * 3600, 1.0), 20700);
  EXPECT_EQ(Scheduler::steps_between(0, 1.0, 0.1), 10);
  EXPECT_EQ(Scheduler::steps_between(0, 1.05, 0.1), 11);
}

TEST(Scheduler, RunCountsStepsAndReportsLifecycle)
{
  struct Obs : Observer {
    int steps = 0;
    std::vector<std::string> lifecycle;
    void on_step(const StepReport&) override { ++steps; }
    void on_lifecycle(const Event& e) override { lifecycle.push_back(e.message); }
  } obs;
  Scheduler s(day_clock());
  s.set_observer(&obs);
  auto sum = s.run(day_clock().epoch_s + 60);
  EXPECT_EQ(sum.steps, 60);
  EXPECT_EQ(obs.steps, 60);
  ASSERT_EQ(obs.lifecycle.size(), 2u);
  EXPECT_EQ(obs.lifecycle[0], "run started");
}

TEST(Transcript, IdenticalRunsIdenticalTranscripts)
{
  auto run = [] {
    Scheduler s(day_clock());
    Counter c;
    s.register_simulator({"pv", {}, {"pv.power"}}, [&](StepContext& ctx) { c.step(ctx); });
    std::ostringstream out;
    for (int i = 0; i < 100; ++i) {
      auto r = s.step_all();
      write_transcript(out, r);
    }
    return out.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_NE(a.find("0 pv.power 1\n"), std::string::npos);
}
