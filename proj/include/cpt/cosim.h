#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

/// Fixed-step co-simulation core. Simulators declare the signals they read
/// and write; each step runs in two phases:
///   1. every simulator reads the values published at the previous step and
///      stages its outputs (registration order);
///   2. relays (the network medium) transform staged values, then all new
///      outputs are published at once.
/// A value produced at step k is therefore first visible at step k+1.
namespace cpt::cosim {

using Bytes = std::vector<std::uint8_t>;
using FrameBatch = std::vector<Bytes>;

/// monostate is the explicit "nothing this step" value.
using Payload = std::variant<std::monostate, double, FrameBatch>;

struct SimClock {
  double epoch_s = 0.0;  ///< time of day at step 0
  double step_s = 1.0;
  std::int64_t now = 0;  ///< index of the next step to execute

  double time_of(std::int64_t step) const { return epoch_s + static_cast<double>(step) * step_s; }
  double now_s() const { return time_of(now); }
};

struct SimulatorHandle {
  std::string id;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

struct ExchangeRecord {
  std::int64_t step = 0;
  std::string signal;
  Payload value;

  bool operator==(const ExchangeRecord&) const = default;
};

struct Event {
  std::int64_t step = 0;
  double time_s = 0.0;
  std::string source;
  std::string message;
};

class RegistrationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A simulator threw during a step; simulator() names it.
class StepError : public std::runtime_error {
 public:
  StepError(std::string simulator, std::int64_t step, const std::string& detail);
  const std::string& simulator() const { return simulator_; }
  std::int64_t step() const { return step_; }

 private:
  std::string simulator_;
  std::int64_t step_;
};

class Scheduler;

/// Per-call view a simulator gets of the exchange.
class StepContext {
 public:
  std::int64_t step() const { return step_; }
  double time_s() const { return time_s_; }
  double step_s() const { return step_s_; }

  /// Last published value of a declared input. For relays: the value staged
  /// in this step.
  const Payload& input(std::string_view signal) const;
  /// Convenience: the input as a power value, or fallback when empty.
  double input_value(std::string_view signal, double fallback = 0.0) const;
  /// Convenience: the input as frames; empty when nothing was sent.
  const FrameBatch& input_frames(std::string_view signal) const;

  void publish(std::string_view signal, Payload value);
  void emit(std::string message);

 private:
  friend class Scheduler;
  StepContext(Scheduler& owner, std::size_t sim, std::int64_t step, double time_s, double step_s)
      : owner_(owner), sim_(sim), step_(step), time_s_(time_s), step_s_(step_s)
  {
  }

  Scheduler& owner_;
  std::size_t sim_;
  std::int64_t step_;
  double time_s_;
  double step_s_;
};

using StepFn = std::function<void(StepContext&)>;

struct StepReport {
  std::int64_t step = 0;
  double time_s = 0.0;
  std::span<const ExchangeRecord> records;
  std::span<const Event> events;
};

/// Receives every completed step and lifecycle events, in order.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_step(const StepReport& report) = 0;
  virtual void on_lifecycle(const Event& event) { (void)event; }
};

struct RunOptions {
  bool realtime = false;  ///< pace steps to wall clock
};

struct RunSummary {
  std::int64_t steps = 0;
  std::chrono::duration<double> wall_time{0.0};
};

class Scheduler {
 public:
  explicit Scheduler(SimClock clock);

  /// Returns the registration index. Throws RegistrationError on a duplicate
  /// id or a second producer of a signal, LifecycleError once stepping began.
  std::size_t register_simulator(SimulatorHandle handle, StepFn behavior);
  /// Relays run during publication; their inputs are the values staged by
  /// ordinary simulators in the same step.
  std::size_t register_relay(SimulatorHandle handle, StepFn behavior);

  void set_observer(Observer* observer) { observer_ = observer; }

  std::vector<ExchangeRecord> step_all();

  /// Executes ceil((until - epoch) / step) steps from the epoch. Step errors
  /// propagate after a lifecycle "aborted" event.
  RunSummary run(double until_s, RunOptions options = {});

  static std::int64_t steps_between(double epoch_s, double until_s, double step_s);

  const SimClock& clock() const { return clock_; }
  std::vector<std::string> registration_order() const;

 private:
  friend class StepContext;

  struct Entry {
    SimulatorHandle handle;
    StepFn behavior;
    bool relay = false;
    std::map<std::string, std::size_t, std::less<>> input_index;
    std::map<std::string, std::size_t, std::less<>> output_index;
  };

  std::size_t add(SimulatorHandle handle, StepFn behavior, bool relay);
  void resolve_inputs();
  void lifecycle(std::string message);

  SimClock clock_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> signal_ids_;
  std::vector<std::string> signal_names_;
  std::vector<std::size_t> producer_of_;
  std::vector<Payload> visible_;
  std::vector<Payload> staged_;
  std::vector<bool> staged_set_;
  std::vector<Event> step_events_;
  Observer* observer_ = nullptr;
  bool started_ = false;
};

/// Stable text form of an exchange, used to compare runs byte for byte.
void write_transcript(std::ostream& out, std::span<const ExchangeRecord> records);

}  // namespace cpt::cosim
