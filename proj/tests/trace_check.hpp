#pragma once

// Reads a simulator event trace and counts frames the relay started while a
// source's DATA was in flight straight to the destination over the RIS.

#include <cstddef>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

namespace tracecheck {

struct Line {
    double t = 0;
    std::string node, kind, frame, fields;
};

inline std::vector<Line> parse(std::istream& in) {
    std::vector<Line> out;
    std::string raw;
    while (std::getline(in, raw)) {
        std::istringstream ss(raw);
        Line l;
        std::string t;
        std::getline(ss, t, '\t');
        std::getline(ss, l.node, '\t');
        std::getline(ss, l.kind, '\t');
        std::getline(ss, l.frame, '\t');
        std::getline(ss, l.fields, '\t');
        l.t = std::stod(t);
        out.push_back(std::move(l));
    }
    return out;
}

inline std::string field(const std::string& fields, const std::string& name) {
    const auto at = fields.find(name + "=");
    if (at == std::string::npos) return {};
    const auto start = at + name.size() + 1;
    return fields.substr(start, fields.find(',', start) - start);
}

struct Report {
    std::size_t ris_data_frames = 0;
    std::size_t relay_starts_inside = 0;
};

// relay: node name of the RIS relay; destination: name of the node it reflects to.
inline Report relay_silence(const std::vector<Line>& lines, const std::string& relay, const std::string& destination) {
    Report r;
    struct Window {
        std::string src;
        double start;
        double end = -1;
    };
    std::vector<Window> windows;
    for (const Line& l : lines) {
        if (l.frame != "DATA" || l.node == relay || field(l.fields, "RA") != destination) continue;
        if (l.kind == "TX_START") windows.push_back({l.node, l.t});
        if (l.kind == "TX_END") {
            for (auto it = windows.rbegin(); it != windows.rend(); ++it) {
                if (it->src == l.node && it->end < 0) {
                    it->end = l.t;
                    break;
                }
            }
        }
    }
    r.ris_data_frames = windows.size();
    for (const Line& l : lines) {
        if (l.node != relay || l.kind != "TX_START") continue;
        for (const Window& w : windows) {
            const double end = w.end < 0 ? 1e300 : w.end;
            if (l.t >= w.start && l.t < end) ++r.relay_starts_inside;
        }
    }
    return r;
}

}  // namespace tracecheck
