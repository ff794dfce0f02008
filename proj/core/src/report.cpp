#include "longtail/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace longtail {

std::string CsvWriter::quote(std::string_view field)
{
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') {
            out += '"';
        }
        out += ch;
    }
    out += '"';
    return out;
}

void CsvWriter::row(std::initializer_list<std::string_view> fields)
{
    bool first = true;
    for (auto field : fields) {
        if (!first) {
            out_ << ',';
        }
        out_ << quote(field);
        first = false;
    }
    out_ << '\n';
}

void CsvWriter::row(std::span<const std::string> fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out_ << ',';
        }
        out_ << quote(fields[i]);
    }
    out_ << '\n';
}

std::string format_percent(std::optional<double> value)
{
    if (!value || std::isnan(*value)) {
        return {};
    }
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.1f", *value);
    return buffer;
}

std::string format_real(double value)
{
    char buffer[32];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return ec == std::errc{} ? std::string(buffer, ptr) : std::string("nan");
}

void write_report_csv(const EvalReport& report, const ReportContext& context, std::ostream& out)
{
    CsvWriter csv(out);
    csv.row({"method", "sampler", "seed", "group", "accuracy", "correct", "total"});
    auto emit = [&](std::string_view group, const SplitScore& score) {
        csv.row({report.method, context.sampler, context.seed, group,
                 format_percent(score.accuracy()), std::to_string(score.correct),
                 std::to_string(score.total)});
    };
    emit("all", report.all);
    emit("many", report.many);
    emit("medium", report.medium);
    emit("few", report.few);
    csv.row({report.method, context.sampler, context.seed, "class_avg",
             format_percent(report.class_average()), "", ""});
    for (std::size_t c = 0; c < report.class_total.size(); ++c) {
        emit("class_" + std::to_string(c), SplitScore{report.class_correct[c], report.class_total[c]});
    }
}

void write_norms_csv(const ClassProfile& profile, std::span<const std::string> head_names,
                     std::span<const WeightNormProfile> profiles, std::ostream& out)
{
    if (head_names.size() != profiles.size()) {
        throw Error("write_norms_csv: names and profiles differ in length");
    }
    CsvWriter csv(out);
    std::vector<std::string> header{"rank", "class", "count", "split"};
    header.insert(header.end(), head_names.begin(), head_names.end());
    csv.row(header);
    for (std::size_t rank = 0; rank < profile.order.size(); ++rank) {
        const auto c = static_cast<std::size_t>(profile.order[rank]);
        std::vector<std::string> fields{std::to_string(rank), std::to_string(c),
                                        std::to_string(profile.counts[c]),
                                        std::string(to_string(profile.splits[c]))};
        for (const auto& p : profiles) {
            fields.push_back(format_real(p.norms.at(rank)));
        }
        csv.row(fields);
    }
}

void write_sweep_csv(std::span<const TauSweepRow> rows, std::ostream& out)
{
    CsvWriter csv(out);
    csv.row({"tau", "many", "medium", "few", "all"});
    for (const auto& r : rows) {
        csv.row({format_real(r.tau), format_percent(r.many), format_percent(r.medium),
                 format_percent(r.few), format_percent(r.all)});
    }
}

} // namespace longtail
