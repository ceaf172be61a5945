#include "cpt/cosim.h"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

namespace cpt::cosim {

StepError::StepError(std::string simulator, std::int64_t step, const std::string& detail)
    : std::runtime_error("simulator '" + simulator + "' failed at step " + std::to_string(step) +
                         ": " + detail),
      simulator_(std::move(simulator)),
      step_(step)
{
}

const Payload& StepContext::input(std::string_view signal) const
{
  const auto& entry = owner_.entries_[sim_];
  auto it = entry.input_index.find(signal);
  if (it == entry.input_index.end()) {
    throw std::logic_error("'" + entry.handle.id + "' reads undeclared input '" +
                           std::string(signal) + "'");
  }
  return entry.relay ? owner_.staged_[it->second] : owner_.visible_[it->second];
}

double StepContext::input_value(std::string_view signal, double fallback) const
{
  const auto& v = input(signal);
  if (const auto* d = std::get_if<double>(&v)) {
    return *d;
  }
  return fallback;
}

const FrameBatch& StepContext::input_frames(std::string_view signal) const
{
  static const FrameBatch empty;
  const auto& v = input(signal);
  if (const auto* f = std::get_if<FrameBatch>(&v)) {
    return *f;
  }
  return empty;
}

void StepContext::publish(std::string_view signal, Payload value)
{
  const auto& entry = owner_.entries_[sim_];
  auto it = entry.output_index.find(signal);
  if (it == entry.output_index.end()) {
    throw std::logic_error("'" + entry.handle.id + "' publishes undeclared output '" +
                           std::string(signal) + "'");
  }
  owner_.staged_[it->second] = std::move(value);
  owner_.staged_set_[it->second] = true;
}

void StepContext::emit(std::string message)
{
  owner_.step_events_.push_back(
      Event{step_, time_s_, owner_.entries_[sim_].handle.id, std::move(message)});
}

Scheduler::Scheduler(SimClock clock) : clock_(clock)
{
  if (!(clock_.step_s > 0.0)) {
    throw std::invalid_argument("scheduler step must be > 0");
  }
}

std::size_t Scheduler::register_simulator(SimulatorHandle handle, StepFn behavior)
{
  return add(std::move(handle), std::move(behavior), false);
}

std::size_t Scheduler::register_relay(SimulatorHandle handle, StepFn behavior)
{
  return add(std::move(handle), std::move(behavior), true);
}

std::size_t Scheduler::add(SimulatorHandle handle, StepFn behavior, bool relay)
{
  if (started_) {
    throw LifecycleError("cannot register '" + handle.id + "' after the run started");
  }
  if (handle.id.empty()) {
    throw RegistrationError("simulator id must not be empty");
  }
  for (const auto& e : entries_) {
    if (e.handle.id == handle.id) {
      throw RegistrationError("duplicate simulator id '" + handle.id + "'");
    }
  }
  for (std::size_t i = 0; i < handle.outputs.size(); ++i) {
    const auto& out = handle.outputs[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (handle.outputs[j] == out) {
        throw RegistrationError("'" + handle.id + "' declares output '" + out + "' twice");
      }
    }
    auto it = signal_ids_.find(out);
    if (it != signal_ids_.end() && producer_of_[it->second] != SIZE_MAX) {
      throw RegistrationError("signal '" + out + "' already produced by '" +
                              entries_[producer_of_[it->second]].handle.id + "'");
    }
  }

  const std::size_t index = entries_.size();
  Entry entry{std::move(handle), std::move(behavior), relay, {}, {}};
  auto intern = [this](const std::string& name) {
    auto [it, inserted] = signal_ids_.try_emplace(name, signal_names_.size());
    if (inserted) {
      signal_names_.push_back(name);
      producer_of_.push_back(SIZE_MAX);
    }
    return it->second;
  };
  for (const auto& out : entry.handle.outputs) {
    const auto id = intern(out);
    producer_of_[id] = index;
    entry.output_index.emplace(out, id);
  }
  for (const auto& in : entry.handle.inputs) {
    entry.input_index.emplace(in, intern(in));
  }
  entries_.push_back(std::move(entry));
  return index;
}

void Scheduler::resolve_inputs()
{
  for (const auto& e : entries_) {
    for (const auto& [name, id] : e.input_index) {
      if (producer_of_[id] == SIZE_MAX) {
        throw LifecycleError("input '" + name + "' of '" + e.handle.id + "' has no producer");
      }
      if (e.relay && entries_[producer_of_[id]].relay) {
        throw LifecycleError("relay '" + e.handle.id + "' cannot consume relay output '" + name +
                             "'");
      }
    }
  }
  visible_.assign(signal_names_.size(), Payload{});
  staged_.assign(signal_names_.size(), Payload{});
  staged_set_.assign(signal_names_.size(), false);
}

std::vector<ExchangeRecord> Scheduler::step_all()
{
  if (!started_) {
    resolve_inputs();
    started_ = true;
  }
  const std::int64_t step = clock_.now;
  const double t = clock_.now_s();
  step_events_.clear();
  std::fill(staged_set_.begin(), staged_set_.end(), false);

  auto invoke = [&](std::size_t i) {
    StepContext ctx(*this, i, step, t, clock_.step_s);
    try {
      entries_[i].behavior(ctx);
    } catch (const StepError&) {
      throw;
    } catch (const std::exception& ex) {
      throw StepError(entries_[i].handle.id, step, ex.what());
    }
  };

  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!entries_[i].relay) {
      invoke(i);
    }
  }
  // Unpublished outputs become explicit empty values before relays look at them.
  for (std::size_t id = 0; id < staged_.size(); ++id) {
    if (!staged_set_[id] && producer_of_[id] != SIZE_MAX && !entries_[producer_of_[id]].relay) {
      staged_[id] = std::monostate{};
    }
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].relay) {
      invoke(i);
    }
  }

  std::vector<ExchangeRecord> records;
  for (const auto& e : entries_) {
    for (const auto& out : e.handle.outputs) {
      const auto id = e.output_index.find(out)->second;
      if (!staged_set_[id]) {
        staged_[id] = std::monostate{};
      }
      records.push_back(ExchangeRecord{step, out, staged_[id]});
    }
  }
  visible_.swap(staged_);
  ++clock_.now;

  if (observer_) {
    observer_->on_step(StepReport{step, t, records, step_events_});
  }
  return records;
}

std::int64_t Scheduler::steps_between(double epoch_s, double until_s, double step_s)
{
  if (until_s < epoch_s) {
    throw std::invalid_argument("run end precedes the epoch");
  }
  return static_cast<std::int64_t>(std::ceil((until_s - epoch_s) / step_s - 1e-9));
}

RunSummary Scheduler::run(double until_s, RunOptions options)
{
  const auto total = steps_between(clock_.epoch_s, until_s, clock_.step_s) - clock_.now;
  const auto wall_start = std::chrono::steady_clock::now();
  lifecycle("run started");
  RunSummary summary;
  try {
    for (std::int64_t i = 0; i < total; ++i) {
      if (options.realtime) {
        std::this_thread::sleep_until(
            wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                             std::chrono::duration<double>(static_cast<double>(i) * clock_.step_s)));
      }
      step_all();
      ++summary.steps;
    }
  } catch (const std::exception& ex) {
    lifecycle(std::string("run aborted: ") + ex.what());
    throw;
  }
  summary.wall_time = std::chrono::steady_clock::now() - wall_start;
  lifecycle("run finished after " + std::to_string(summary.steps) + " steps");
  return summary;
}

std::vector<std::string> Scheduler::registration_order() const
{
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    out.push_back(e.handle.id);
  }
  return out;
}

void Scheduler::lifecycle(std::string message)
{
  if (observer_) {
    observer_->on_lifecycle(Event{clock_.now, clock_.now_s(), "scheduler", std::move(message)});
  }
}

void write_transcript(std::ostream& out, std::span<const ExchangeRecord> records)
{
  static constexpr char hex[] = "0123456789abcdef";
  for (const auto& r : records) {
    out << r.step << ' ' << r.signal << ' ';
    if (std::holds_alternative<std::monostate>(r.value)) {
      out << '-';
    } else if (const auto* d = std::get_if<double>(&r.value)) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", *d);
      out << buf;
    } else {
      const auto& frames = std::get<FrameBatch>(r.value);
      out << 'F' << frames.size();
      for (const auto& f : frames) {
        out << ' ';
        for (auto b : f) {
          out << hex[b >> 4] << hex[b & 0xF];
        }
      }
    }
    out << '\n';
  }
}

}  // namespace cpt::cosim
