#include "hallaudit/report.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hallaudit/jsonl.hpp"

namespace hallaudit::report {

using nlohmann::json;

namespace {

const json kAbsent = json{{"absent", true}};

json mean_json(const VadGroupMean& m) {
  return json{{"segments", m.segments}, {"mean_share", m.mean_share ? json(*m.mean_share) : json(nullptr)}};
}

std::string mean_md(const VadGroupMean& m) {
  return m.mean_share ? fmt::format("{} (n={})", percent(*m.mean_share, 1), m.segments) : fmt::format("n/a (n={})", m.segments);
}

std::string fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "n/a";
  return fmt::format("{:.{}f}", v, decimals);
}

std::string p_text(double p) { return p < 0.001 ? fmt::format("{:.2e}", p) : fmt::format("{:.3f}", p); }

void absent(std::string& md) { md += "_Section absent: no input available._\n\n"; }

void rates_md(std::string& md, const stats::RateComparison& r) {
  md += "| Group | Segments | Hallucinated | Rate |\n|---|---:|---:|---:|\n";
  md += fmt::format("| aphasia | {} | {} | {} |\n", r.aphasia.segments, r.aphasia.hallucinated, percent(r.aphasia.rate, 1));
  md += fmt::format("| control | {} | {} | {} |\n\n", r.control.segments, r.control.hallucinated, percent(r.control.rate, 1));
  md += fmt::format("Hallucination rate {} vs {} (aphasia vs control); {} statistic {}, p = {}.\n\n",
                    percent(r.aphasia.rate, 1), percent(r.control.rate, 1), r.test.method, fixed(r.test.statistic, 3),
                    p_text(r.test.p_value));
}

}  // namespace

std::string percent(double ratio, int decimals) {
  if (!std::isfinite(ratio)) return "n/a";
  return fmt::format("{:.{}f}%", 100.0 * ratio, decimals);
}

bool VadGroupMeans::expected_ordering() const {
  const auto& a = aphasia_hallucinated.mean_share;
  const auto& b = aphasia_clean.mean_share;
  const auto& c = control_hallucinated.mean_share;
  const auto& d = control_clean.mean_share;
  return a && b && c && d && *a > *b && *b > *c && *c > *d;
}

VadGroupMeans vad_group_means(const corpus::Corpus& corpus, const std::map<std::string, double>& share_by_segment,
                              const std::set<std::string>& positives, std::string profile) {
  VadGroupMeans out;
  out.profile = std::move(profile);
  std::map<VadGroupMean*, double> sums;
  for (const auto& seg : corpus.segments()) {
    const auto it = share_by_segment.find(seg.segment_id);
    if (it == share_by_segment.end()) continue;
    const bool aphasia = corpus.speaker_of(seg.segment_id).group == corpus::Group::aphasia;
    const bool hallucinated = positives.contains(seg.segment_id);
    auto* cell = aphasia ? (hallucinated ? &out.aphasia_hallucinated : &out.aphasia_clean)
                         : (hallucinated ? &out.control_hallucinated : &out.control_clean);
    ++cell->segments;
    sums[cell] += it->second;
  }
  for (auto* cell : {&out.aphasia_hallucinated, &out.aphasia_clean, &out.control_hallucinated, &out.control_clean})
    if (cell->segments > 0) cell->mean_share = sums[cell] / static_cast<double>(cell->segments);
  return out;
}

CandidateCounts count_candidates(std::span<const detection::HallucinationCandidate> candidates) {
  CandidateCounts c;
  std::set<std::string> segments;
  for (const auto& cand : candidates) {
    switch (cand.status) {
      case detection::CandidateStatus::pending: ++c.pending; break;
      case detection::CandidateStatus::confirmed:
        ++c.confirmed;
        segments.insert(cand.segment_id);
        break;
      case detection::CandidateStatus::rejected: ++c.rejected; break;
    }
  }
  c.hallucinated_segments = segments.size();
  return c;
}

json report_json(const ReportData& d) {
  json r = json::object();
  r["corpus"] = d.corpus ? corpus::to_json(*d.corpus) : kAbsent;
  r["candidates"] = d.candidates ? json{{"pending", d.candidates->pending},
                                        {"confirmed", d.candidates->confirmed},
                                        {"rejected", d.candidates->rejected},
                                        {"hallucinated_segments", d.candidates->hallucinated_segments}}
                                 : kAbsent;
  if (d.rates) {
    r["rates"] = stats::to_json(*d.rates);
    r["rates"]["aphasia"]["percent"] = percent(d.rates->aphasia.rate, 1);
    r["rates"]["control"]["percent"] = percent(d.rates->control.rate, 1);
  } else {
    r["rates"] = kAbsent;
  }
  r["harms"] = d.harms ? harms::to_json(*d.harms) : kAbsent;

  if (d.vad.empty()) {
    r["vad_group_means"] = kAbsent;
  } else {
    json vad = json::array();
    for (const auto& v : d.vad)
      vad.push_back(json{{"profile", v.profile},
                         {"aphasia_hallucinated", mean_json(v.aphasia_hallucinated)},
                         {"aphasia_clean", mean_json(v.aphasia_clean)},
                         {"control_hallucinated", mean_json(v.control_hallucinated)},
                         {"control_clean", mean_json(v.control_clean)},
                         {"expected_ordering", v.expected_ordering()}});
    r["vad_group_means"] = std::move(vad);
  }

  if (d.regressions.empty()) {
    r["regressions"] = kAbsent;
  } else {
    json regs = json::array();
    for (const auto& reg : d.regressions) regs.push_back(stats::to_json(reg));
    r["regressions"] = std::move(regs);
  }

  if (d.matching.empty()) {
    r["matching"] = kAbsent;
  } else {
    json matches = json::array();
    for (const auto& m : d.matching) {
      auto j = stats::to_json(m.result);
      j["spec"] = stats::to_json(m.spec);
      j["rates"] = m.rates ? stats::to_json(*m.rates) : kAbsent;
      matches.push_back(std::move(j));
    }
    r["matching"] = std::move(matches);
  }
  r["stability"] = d.stability ? detection::to_json(*d.stability) : kAbsent;
  r["notes"] = d.notes;
  return r;
}

std::string report_markdown(const ReportData& d) {
  std::string md = "# Hallucination audit report\n\n";

  md += "## Corpus\n\n";
  if (d.corpus) {
    md += fmt::format("{} segments from {} speakers.\n\n", d.corpus->total_segments, d.corpus->total_speakers);
    md += "| Group | Segments | Mean words | Mean duration (s) | Mean word speed (words/s) |\n|---|---:|---:|---:|---:|\n";
    for (const auto& [g, s] : d.corpus->groups) {
      const auto opt = [](const std::optional<double>& v, int dec) { return v ? fixed(*v, dec) : std::string("n/a"); };
      md += fmt::format("| {} | {} | {} | {} | {} |\n", corpus::to_string(g), s.segments, opt(s.mean_word_count, 1),
                        opt(s.mean_duration, 2), opt(s.mean_word_speed, 3));
    }
    md += "\n";
  } else {
    absent(md);
  }

  md += "## Candidates\n\n";
  if (d.candidates) {
    md += fmt::format("{} pending, {} confirmed, {} rejected; {} segments with a confirmed hallucination.\n\n",
                      d.candidates->pending, d.candidates->confirmed, d.candidates->rejected,
                      d.candidates->hallucinated_segments);
  } else {
    absent(md);
  }

  md += "## Hallucination rates by group\n\n";
  if (d.rates)
    rates_md(md, *d.rates);
  else
    absent(md);

  md += "## Harm distribution\n\n";
  if (d.harms) {
    const auto& h = *d.harms;
    md += fmt::format("{} confirmed hallucinations.\n\n", h.total_confirmed);
    md += "| Broad group | Count | Share |\n|---|---:|---:|\n";
    for (auto g : kHarmfulGroups)
      md += fmt::format("| {} | {} | {} |\n", to_string(g), h.per_broad_group.at(g), percent(h.broad_group_share.at(g), 0));
    md += fmt::format("| any harm | {} | {} |\n\n", h.any_harm, percent(h.any_harm_share, 0));
    md += "| Category | Count |\n|---|---:|\n";
    for (const auto& [c, n] : h.per_category) md += fmt::format("| {} | {} |\n", to_string(c), n);
    md += "\n";
  } else {
    absent(md);
  }

  md += "## Non-vocal share by group\n\n";
  if (!d.vad.empty()) {
    md += "| Profile | Aphasia, hallucinated | Aphasia, clean | Control, hallucinated | Control, clean | Expected ordering |\n";
    md += "|---|---:|---:|---:|---:|---|\n";
    for (const auto& v : d.vad)
      md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", v.profile, mean_md(v.aphasia_hallucinated),
                        mean_md(v.aphasia_clean), mean_md(v.control_hallucinated), mean_md(v.control_clean),
                        v.expected_ordering() ? "yes" : "no");
    md += "\n";
  } else {
    absent(md);
  }

  md += "## Logistic regression\n\n";
  if (!d.regressions.empty()) {
    md += "```\n" + stats::format_regression_table(d.regressions) + "```\n\n";
    for (const auto& r : d.regressions) {
      if (r.separation)
        md += fmt::format("Warning: model '{}' shows separation (a coefficient exceeded {:.0f} in magnitude).\n\n", r.name,
                          stats::kSeparationBound);
      else if (!r.converged)
        md += fmt::format("Warning: model '{}' did not converge in {} iterations.\n\n", r.name, r.iterations);
    }
  } else {
    absent(md);
  }

  md += "## Matched comparison\n\n";
  if (!d.matching.empty()) {
    for (const auto& m : d.matching) {
      md += fmt::format("### {} (caliper {:.2f})\n\n", m.spec.name, m.spec.caliper);
      md += fmt::format("{} matched pairs; caliper distance {}{}.\n\n", m.result.n_matched,
                        fixed(m.result.caliper_distance, 4), m.result.ridge_applied ? " (ridge added to covariance)" : "");
      md += "| Covariate | SMD before | SMD after |\n|---|---:|---:|\n";
      for (const auto& b : m.result.balance)
        md += fmt::format("| {} | {} | {} |\n", b.covariate, fixed(b.smd_before, 3), fixed(b.smd_after, 3));
      md += "\n";
      if (m.rates) rates_md(md, *m.rates);
    }
  } else {
    absent(md);
  }

  md += "## Persistence across run pairs\n\n";
  if (d.stability) {
    md += fmt::format("{} over {} run pair{}.\n\n", d.stability->summary(), d.stability->pairs, d.stability->pairs == 1 ? "" : "s");
    for (const auto& [g, s] : d.stability->by_group)
      md += fmt::format("- {}: {}/{} persistent\n", corpus::to_string(g), s.persistent, s.ever_flagged);
    md += "\n";
  } else {
    absent(md);
  }

  if (!d.notes.empty()) {
    md += "## Notes\n\n";
    for (const auto& n : d.notes) md += "- " + n + "\n";
    md += "\n";
  }
  return md;
}

void export_report(const ReportData& data, const std::filesystem::path& directory, std::initializer_list<Format> formats) {
  std::filesystem::create_directories(directory);
  for (auto f : formats) {
    if (f == Format::json)
      jsonl::write_text(directory / "report.json", report_json(data).dump(2) + "\n");
    else
      jsonl::write_text(directory / "report.md", report_markdown(data));
  }
}

}  // namespace hallaudit::report
