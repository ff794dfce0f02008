#pragma once

#include "longtail/evaluation.hpp"

#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longtail {

// RFC 4180 style: fields containing a comma, quote, CR or LF are quoted,
// embedded quotes doubled, records end in "\n".
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void row(std::initializer_list<std::string_view> fields);
    void row(std::span<const std::string> fields);

    static std::string quote(std::string_view field);

private:
    std::ostream& out_;
};

// Percentage with one decimal; empty for an absent value.
std::string format_percent(std::optional<double> value);
// Shortest text that round-trips a double.
std::string format_real(double value);

struct ReportContext {
    std::string sampler;
    std::string seed;
};

// One row per group: all, many, medium, few, class_avg, then class_<j>.
// Columns: method,sampler,seed,group,accuracy,correct,total
void write_report_csv(const EvalReport& report, const ReportContext& context, std::ostream& out);

// Columns: rank,class,count,split,<one norm column per head>
void write_norms_csv(const ClassProfile& profile, std::span<const std::string> head_names,
                     std::span<const WeightNormProfile> profiles, std::ostream& out);

// Columns: tau,many,medium,few,all
void write_sweep_csv(std::span<const TauSweepRow> rows, std::ostream& out);

} // namespace longtail
