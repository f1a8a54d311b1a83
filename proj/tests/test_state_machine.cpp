#include <gtest/gtest.h>

#include <sstream>

#include "firebot/state_machine.hpp"

using namespace firebot;

namespace {

struct Counter {
    int ticks = 0;
    int entries = 0;
    std::vector<std::string> seen;
    void on_transition(const Event& e) { seen.push_back(e.to); }
};

using Def = StateDef<Counter>;

std::optional<std::string> after(Counter& c, int n, const std::string& out) {
    return ++c.ticks >= n ? std::optional<std::string>(out) : std::nullopt;
}

TransitionTable two_state() {
    TransitionTable t;
    t.initial = "A";
    t.terminals = {"B"};
    t.add("A", "done", "B");
    return t;
}

}  // namespace

TEST(StateMachine, TwoStateLog) {
    std::vector<Def> states{{"A", {"done"}, [](Counter& c) { ++c.entries; }, [](Counter& c) { return after(c, 5, "done"); }, {}}};
    Counter ctx;
    SimClock clock;
    EventLog log;
    EXPECT_EQ(run_machine(states, two_state(), ctx, clock, log), "B");
    EXPECT_EQ(visited_states(log), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(log[0].outcome, "start");
    EXPECT_EQ(log[1].from, "A");
    EXPECT_EQ(log[1].outcome, "done");
    EXPECT_NEAR(log[1].time, 0.05, 1e-12);
    EXPECT_EQ(ctx.entries, 1);
    EXPECT_EQ(ctx.seen, visited_states(log));
}

TEST(StateMachine, UndeclaredOutcome) {
    std::vector<Def> states{{"A", {"done"}, {}, [](Counter&) { return std::optional<std::string>("oops"); }, {}}};
    Counter ctx;
    SimClock clock;
    EventLog log;
    try {
        run_machine(states, two_state(), ctx, clock, log);
        FAIL() << "expected undefined_transition";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::undefined_transition);
    }
    EXPECT_EQ(log.size(), 1u);
}

TEST(StateMachine, TableMustBeClosed) {
    auto expect_invalid = [](const std::vector<Def>& states, const TransitionTable& t) {
        try {
            validate_table(states, t);
            ADD_FAILURE() << "expected invalid_table";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::invalid_table);
        }
    };
    const std::vector<Def> ab{{"A", {"done", "again"}, {}, {}, {}}};
    TransitionTable t = two_state();
    expect_invalid(ab, t);  // "again" unmapped
    t.add("A", "again", "A");
    EXPECT_NO_THROW(validate_table(ab, t));

    TransitionTable outside = t;
    outside.add("A", "again", "Z");
    expect_invalid(ab, outside);

    TransitionTable undeclared = t;
    undeclared.add("A", "bogus", "B");
    expect_invalid(ab, undeclared);

    std::vector<Def> orphan = ab;
    orphan.push_back({"C", {"done"}, {}, {}, {}});
    TransitionTable with_c = t;
    with_c.add("C", "done", "B");
    expect_invalid(orphan, with_c);

    std::vector<Def> timed{{"A", {"done"}, {}, {}, 1.0}};
    expect_invalid(timed, two_state());

    TransitionTable bad_init = t;
    bad_init.initial = "Q";
    expect_invalid(ab, bad_init);
}

TEST(StateMachine, StateTimeoutOutcome) {
    std::vector<Def> states{{"A", {"done", "timeout"}, {}, [](Counter&) { return std::optional<std::string>(); }, 0.5}};
    TransitionTable t = two_state();
    t.terminals.insert("T");
    t.add("A", "timeout", "T");
    Counter ctx;
    SimClock clock;
    EventLog log;
    EXPECT_EQ(run_machine(states, t, ctx, clock, log), "T");
    EXPECT_NEAR(log.back().time, 0.5, 1e-9);
    EXPECT_EQ(log.back().outcome, "timeout");
}

TEST(StateMachine, GlobalTimeoutKeepsLog) {
    std::vector<Def> states{{"A", {"done", "flip"}, {}, [](Counter& c) { return after(c, 3, "flip"); }, {}},
                            {"A2", {"flip"}, [](Counter& c) { c.ticks = 0; }, [](Counter& c) { return after(c, 3, "flip"); }, {}}};
    TransitionTable t = two_state();
    t.add("A", "flip", "A2");
    t.add("A2", "flip", "A");
    Counter ctx;
    SimClock clock{0.01, 2.0, 0};
    EventLog log;
    try {
        run_machine(states, t, ctx, clock, log);
        FAIL() << "expected global_timeout";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::global_timeout);
    }
    EXPECT_GT(log.size(), 10u);
    EXPECT_LE(log.back().time, 2.0 + 1e-9);
}

TEST(StateMachine, OneTransitionPerTickStrictlyIncreasing) {
    // every state finishes immediately
    std::vector<Def> states;
    TransitionTable t;
    t.initial = "S0";
    t.terminals = {"END"};
    for (int i = 0; i < 20; ++i) {
        const std::string name = "S" + std::to_string(i);
        states.push_back({name, {"go"}, {}, [](Counter&) { return std::optional<std::string>("go"); }, {}});
        t.add(name, "go", i == 19 ? "END" : "S" + std::to_string(i + 1));
    }
    Counter ctx;
    SimClock clock;
    EventLog log;
    run_machine(states, t, ctx, clock, log);
    ASSERT_EQ(log.size(), 21u);
    for (std::size_t i = 1; i < log.size(); ++i) {
        EXPECT_GT(log[i].time, log[i - 1].time);
        EXPECT_NEAR(log[i].time - log[i - 1].time, clock.dt, 1e-12);
    }
}

TEST(StateMachine, EventLogCsv) {
    EventLog log{{0.0, "", "start", "A"}, {0.25, "A", "done", "B"}};
    std::ostringstream out;
    write_event_log(out, log);
    EXPECT_EQ(out.str(), "time,from,outcome,to\n0,,start,A\n0.25,A,done,B\n");
}
