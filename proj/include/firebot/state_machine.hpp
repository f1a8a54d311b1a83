#pragma once

// Outcome-driven state machine: each state ticks until it reports an
// outcome, and the transition table picks the next state.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "firebot/error.hpp"

namespace firebot {

template <typename Ctx>
struct StateDef {
    std::string name;
    std::vector<std::string> outcomes;
    std::function<void(Ctx&)> on_entry;
    std::function<std::optional<std::string>(Ctx&)> tick;
    std::optional<double> timeout;  // emits "timeout" once exceeded
};

struct TransitionTable {
    std::map<std::pair<std::string, std::string>, std::string> next;
    std::string initial;
    std::set<std::string> terminals;

    void add(const std::string& state, const std::string& outcome, const std::string& to) {
        next[{state, outcome}] = to;
    }
};

struct Event {
    double time = 0.0;
    std::string from;
    std::string outcome;
    std::string to;
};

using EventLog = std::vector<Event>;

inline std::vector<std::string> visited_states(const EventLog& log) {
    std::vector<std::string> out;
    for (const Event& e : log) out.push_back(e.to);
    return out;
}

inline void write_event_log(std::ostream& out, const EventLog& log) {
    out << "time,from,outcome,to\n";
    for (const Event& e : log) out << e.time << "," << e.from << "," << e.outcome << "," << e.to << "\n";
}

/// Checks that the table is closed over the declared states and outcomes and
/// that every state can be reached from the initial one.
template <typename Ctx>
void validate_table(const std::vector<StateDef<Ctx>>& states, const TransitionTable& table) {
    std::map<std::string, const StateDef<Ctx>*> by_name;
    for (const auto& s : states) {
        if (!by_name.emplace(s.name, &s).second) throw Error(ErrorKind::invalid_table, "duplicate state " + s.name);
    }
    auto known = [&](const std::string& n) { return by_name.count(n) > 0 || table.terminals.count(n) > 0; };
    if (!known(table.initial)) throw Error(ErrorKind::invalid_table, "unknown initial state " + table.initial);
    for (const auto& [key, to] : table.next) {
        if (!by_name.count(key.first)) throw Error(ErrorKind::invalid_table, "transition from unknown state " + key.first);
        if (!known(to)) throw Error(ErrorKind::invalid_table, "transition to unknown state " + to);
        const auto& outs = by_name[key.first]->outcomes;
        if (std::find(outs.begin(), outs.end(), key.second) == outs.end()) {
            throw Error(ErrorKind::invalid_table, key.first + " does not declare outcome " + key.second);
        }
    }
    for (const auto& s : states) {
        if (table.terminals.count(s.name)) continue;
        for (const auto& o : s.outcomes) {
            if (!table.next.count({s.name, o})) {
                throw Error(ErrorKind::invalid_table, "no transition for " + s.name + " / " + o);
            }
        }
        if (s.timeout && std::find(s.outcomes.begin(), s.outcomes.end(), "timeout") == s.outcomes.end()) {
            throw Error(ErrorKind::invalid_table, s.name + " has a timeout but no timeout outcome");
        }
    }
    std::set<std::string> seen{table.initial};
    std::vector<std::string> todo{table.initial};
    while (!todo.empty()) {
        const std::string cur = todo.back();
        todo.pop_back();
        for (const auto& [key, to] : table.next) {
            if (key.first == cur && seen.insert(to).second) todo.push_back(to);
        }
    }
    for (const auto& s : states) {
        if (!seen.count(s.name)) throw Error(ErrorKind::invalid_table, "state " + s.name + " is unreachable");
    }
    for (const auto& t : table.terminals) {
        if (!seen.count(t)) throw Error(ErrorKind::invalid_table, "terminal " + t + " is unreachable");
    }
}

struct SimClock {
    double dt = 0.01;
    double global_timeout = 900.0;
    std::int64_t ticks = 0;

    double now() const { return static_cast<double>(ticks) * dt; }
};

/// Context types may expose `void on_transition(const Event&)`; it is
/// called after every transition is logged.
template <typename Ctx>
concept TransitionObserver = requires(Ctx& c, const Event& e) { c.on_transition(e); };

/// Runs until a terminal state is entered. The initial entry is logged at
/// t = 0 with outcome "start". At most one transition happens per tick, so
/// event times are strictly increasing. Throws global_timeout when the
/// clock passes the limit; `log` keeps everything recorded until then.
template <typename Ctx>
std::string run_machine(const std::vector<StateDef<Ctx>>& states, const TransitionTable& table, Ctx& ctx,
                        SimClock& clock, EventLog& log,
                        const std::function<void(Ctx&, SimClock&)>& before_tick = {},
                        const std::function<void(Ctx&, SimClock&)>& after_tick = {}) {
    validate_table(states, table);
    std::map<std::string, const StateDef<Ctx>*> by_name;
    for (const auto& s : states) by_name[s.name] = &s;

    auto enter = [&](const std::string& from, const std::string& outcome, const std::string& to) {
        log.push_back({clock.now(), from, outcome, to});
        if constexpr (TransitionObserver<Ctx>) ctx.on_transition(log.back());
        if (table.terminals.count(to)) return;
        const auto* s = by_name.at(to);
        if (s->on_entry) s->on_entry(ctx);
    };

    std::string current = table.initial;
    enter("", "start", current);
    double entered_at = clock.now();
    while (!table.terminals.count(current)) {
        ++clock.ticks;
        if (clock.now() > clock.global_timeout + 1e-9) {
            throw Error(ErrorKind::global_timeout, "mission exceeded the global time limit");
        }
        if (before_tick) before_tick(ctx, clock);
        const auto* s = by_name.at(current);
        std::optional<std::string> outcome = s->tick ? s->tick(ctx) : std::nullopt;
        if (!outcome && s->timeout && clock.now() - entered_at >= *s->timeout - 1e-9) outcome = "timeout";
        if (after_tick) after_tick(ctx, clock);
        if (!outcome) continue;
        const auto it = table.next.find({current, *outcome});
        if (it == table.next.end()) {
            throw Error(ErrorKind::undefined_transition, current + " emitted undeclared outcome " + *outcome);
        }
        const std::string from = current;
        current = it->second;
        entered_at = clock.now();
        enter(from, *outcome, current);
    }
    return current;
}

}  // namespace firebot
