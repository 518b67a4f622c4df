#pragma once

#include <cstdint>
#include <queue>
#include <vector>

namespace goalnet::sim {

// Min-heap of timed events. Events at equal time pop in insertion order.
template <typename Event, typename Time = std::int64_t>
class Calendar {
public:
    void push(Time t, Event e) { _heap.push({t, _seq++, std::move(e)}); }
    bool empty() const { return _heap.empty(); }
    std::size_t size() const { return _heap.size(); }
    Time top_time() const { return _heap.top().time; }

    std::pair<Time, Event> pop() {
        Entry e = std::move(const_cast<Entry&>(_heap.top()));
        _heap.pop();
        return {e.time, std::move(e.event)};
    }

    template <typename F>
    void for_each(F&& f) const {
        // copy is cheap enough for diagnostics only
        auto h = _heap;
        while (!h.empty()) {
            f(h.top().time, h.top().event);
            h.pop();
        }
    }

private:
    struct Entry {
        Time time;
        std::uint64_t seq;
        Event event;
        bool operator>(const Entry& o) const { return time != o.time ? time > o.time : seq > o.seq; }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> _heap;
    std::uint64_t _seq = 0;
};

// Completions ordered by (time, rank, task).
struct CompletionOrder {
    template <typename C>
    bool operator()(const C& a, const C& b) const {
        if (a.time_ns != b.time_ns)
            return a.time_ns > b.time_ns;
        return a.handle > b.handle;
    }
};

} // namespace goalnet::sim
