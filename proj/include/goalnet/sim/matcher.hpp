#pragma once

#include <algorithm>
#include <deque>
#include <tuple>
#include <vector>
#include <optional>
#include <unordered_map>

#include "goalnet/common.hpp"

namespace goalnet::sim {

struct ChannelKey {
    Rank src = 0;
    Rank dst = 0;
    Tag tag = 0;
    bool operator==(const ChannelKey&) const = default;
};

struct ChannelKeyHash {
    std::size_t operator()(const ChannelKey& k) const {
        return static_cast<std::size_t>(mix_hash(mix_hash(k.src, k.dst), k.tag));
    }
};

// Non-overtaking matching: on each (src, dst, tag) channel the k-th posted
// send pairs with the k-th posted recv.
template <typename SendInfo, typename RecvInfo>
class Matcher {
public:
    // Returns the waiting recv this send pairs with, or queues the send.
    std::optional<RecvInfo> post_send(const ChannelKey& key, SendInfo s) {
        auto& ch = _channels[key];
        if (!ch.recvs.empty()) {
            RecvInfo r = std::move(ch.recvs.front());
            ch.recvs.pop_front();
            return r;
        }
        ch.sends.push_back(std::move(s));
        return std::nullopt;
    }

    std::optional<SendInfo> post_recv(const ChannelKey& key, RecvInfo r) {
        auto& ch = _channels[key];
        if (!ch.sends.empty()) {
            SendInfo s = std::move(ch.sends.front());
            ch.sends.pop_front();
            return s;
        }
        ch.recvs.push_back(std::move(r));
        return std::nullopt;
    }

    // Sends still waiting for a recv, in channel-key then post order.
    std::vector<SendInfo> unmatched_sends() const {
        std::vector<std::pair<ChannelKey, const Channel*>> order;
        for (const auto& [k, ch] : _channels)
            if (!ch.sends.empty())
                order.push_back({k, &ch});
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            return std::tie(a.first.src, a.first.dst, a.first.tag) < std::tie(b.first.src, b.first.dst, b.first.tag);
        });
        std::vector<SendInfo> out;
        for (const auto& [k, ch] : order)
            out.insert(out.end(), ch->sends.begin(), ch->sends.end());
        return out;
    }

    std::size_t pending() const {
        std::size_t n = 0;
        for (const auto& [k, ch] : _channels)
            n += ch.sends.size() + ch.recvs.size();
        return n;
    }

private:
    struct Channel {
        std::deque<SendInfo> sends;
        std::deque<RecvInfo> recvs;
    };
    std::unordered_map<ChannelKey, Channel, ChannelKeyHash> _channels;
};

} // namespace goalnet::sim
