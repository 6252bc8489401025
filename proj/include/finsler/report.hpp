#pragma once

// Structured-text run records.  A document is an ordered list of sections,
// each an ordered list of key = value lines.  Sections flagged meta carry
// volatile data (timestamps, timings, host facts); everything else is the
// deterministic payload: same config + engine version => byte-identical
// payload() output.  Format notes live in docs/report-format.md.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace finsler {

inline constexpr int kReportSchema = 1;
inline constexpr const char* kEngineVersion = "0.1.0";

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_doubles(const double* v, int count) {
    std::string out;
    for (int i = 0; i < count; ++i) {
        if (i) out += ' ';
        out += fmt_double(v[i]);
    }
    return out;
}

struct ReportSection {
    std::string name;
    bool meta = false;
    std::vector<std::pair<std::string, std::string>> entries;

    void put(std::string key, std::string value) {
        entries.emplace_back(std::move(key), std::move(value));
    }
    void put(std::string key, double value) {
        entries.emplace_back(std::move(key), fmt_double(value));
    }
    void put(std::string key, int value) {
        entries.emplace_back(std::move(key), std::to_string(value));
    }
    void put(std::string key, long long value) {
        entries.emplace_back(std::move(key), std::to_string(value));
    }
};

struct ReportDocument {
    std::vector<ReportSection> sections;

    ReportSection& add(std::string name, bool meta = false) {
        sections.push_back(ReportSection{std::move(name), meta, {}});
        return sections.back();
    }

    std::string render(bool include_meta) const {
        std::string out = "finslerlab-report schema ";
        out += std::to_string(kReportSchema);
        out += "\nengine = ";
        out += kEngineVersion;
        out += '\n';
        for (const auto& sec : sections) {
            if (sec.meta && !include_meta) continue;
            out += "\n[" + sec.name + "]\n";
            for (const auto& [k, v] : sec.entries)
                out += k + " = " + v + '\n';
        }
        return out;
    }

    std::string serialize() const { return render(true); }
    std::string payload() const { return render(false); }
};

}  // namespace finsler
