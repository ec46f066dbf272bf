// SPDX-License-Identifier: Apache-2.0

#include "gtn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace gtn {

using nlohmann::json;

DeltaStats compute_delta_stats(const std::map<std::string, double>& per_student) {
  DeltaStats s;
  s.per_student = per_student;
  if (per_student.empty()) return s;
  double sum = 0.0, mn = 1e300, mx = -1e300;
  for (const auto& [_, d] : per_student) {
    sum += d;
    mn = std::min(mn, d);
    mx = std::max(mx, d);
  }
  const double n = static_cast<double>(per_student.size());
  s.mu = sum / n;
  double var = 0.0;
  for (const auto& [_, d] : per_student) var += (d - s.mu) * (d - s.mu);
  s.sigma = std::sqrt(var / n);
  s.range = mx - mn;
  return s;
}

int timecost_crossover(double gtn_seconds, double sftn_mean_seconds) {
  if (!(sftn_mean_seconds > 0.0)) {
    throw std::invalid_argument("timecost: non-positive specialized-teacher time");
  }
  int k = 1;
  while (static_cast<double>(k) * sftn_mean_seconds <= gtn_seconds) {
    ++k;
    if (k > 1000000) throw std::runtime_error("timecost: crossover out of range");
  }
  return k;
}

std::vector<MemoryRow> memory_report(
    const std::vector<std::pair<std::string, std::int64_t>>& students,
    const std::vector<double>& device_budgets_mb) {
  std::vector<MemoryRow> rows;
  for (const auto& [name, params] : students) {
    MemoryRow r;
    r.student = name;
    r.param_count = params;
    r.mb_32bit = static_cast<double>(params) * 4.0 / 1e6;
    r.mb_8bit = static_cast<double>(params) * 1.0 / 1e6;
    for (double budget : device_budgets_mb) r.fits.push_back(r.mb_8bit <= budget);
    rows.push_back(std::move(r));
  }
  return rows;
}

json cell_to_json(const CellRecord& cell) {
  json j{{"id", cell.id},     {"stage", cell.stage},     {"method", cell.method},
         {"student", cell.student}, {"seed", cell.seed}, {"accuracy_pct", cell.accuracy_pct},
         {"seconds", cell.seconds}};
  if (!cell.arch.empty()) j["arch"] = cell.arch;
  if (!cell.error.empty()) j["error"] = cell.error;
  return j;
}

CellRecord cell_from_json(const json& j) {
  CellRecord c;
  c.id = j.at("id").get<std::string>();
  c.stage = j.value("stage", "");
  c.method = j.value("method", "");
  c.student = j.value("student", "");
  c.seed = j.value("seed", 0ull);
  c.accuracy_pct = j.value("accuracy_pct", -1.0);
  c.seconds = j.value("seconds", 0.0);
  if (j.contains("arch")) c.arch = j.at("arch").get<ArchitectureSample>();
  c.error = j.value("error", "");
  return c;
}

namespace {

std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

void render_delta_block(std::ostringstream& os, const json& delta) {
  for (auto it = delta.begin(); it != delta.end(); ++it) {
    const json& d = it.value();
    os << "  " << it.key() << ": mu=" << fixed(d.value("mu", 0.0), 2)
       << "  sigma=" << fixed(d.value("sigma", 0.0), 2)
       << "  range=" << fixed(d.value("range", 0.0), 2) << "\n";
    if (d.contains("per_student")) {
      os << "    per student:";
      for (auto s = d["per_student"].begin(); s != d["per_student"].end(); ++s) {
        os << " " << s.key() << "=" << fixed(s.value().get<double>(), 2);
      }
      os << "\n";
    }
  }
}

}  // namespace

std::string ExperimentReport::render_text() const {
  std::ostringstream os;
  os << "experiment report (config " << doc.value("config_hash", "") << ")\n";

  if (doc.contains("timing") && doc["timing"].contains("teachers")) {
    os << "\nteacher training\n";
    const json& teachers = doc["timing"]["teachers"];
    for (auto it = teachers.begin(); it != teachers.end(); ++it) {
      os << "  " << it.key() << ": acc=" << fixed(it.value().value("accuracy_pct", 0.0), 2)
         << "%  time=" << fixed(it.value().value("seconds", 0.0), 2) << "s\n";
    }
  }

  if (doc.contains("accuracy")) {
    os << "\nstudent accuracy (% on held-out test, mean over seeds)\n";
    const json& acc = doc["accuracy"];
    std::vector<std::string> methods;
    for (auto it = acc.begin(); it != acc.end(); ++it) methods.push_back(it.key());
    std::vector<std::string> students;
    if (!methods.empty()) {
      for (auto s = acc[methods[0]].begin(); s != acc[methods[0]].end(); ++s) {
        students.push_back(s.key());
      }
    }
    os << "  " << "student";
    for (const auto& m : methods) os << "  " << m;
    os << "\n";
    for (const auto& s : students) {
      os << "  " << s;
      for (const auto& m : methods) {
        if (acc[m].contains(s) && acc[m][s].contains("mean")) {
          os << "  " << fixed(acc[m][s]["mean"].get<double>(), 2);
        } else {
          os << "  -";
        }
      }
      os << "\n";
    }
  }

  if (doc.contains("delta")) {
    os << "\ndelta vs vanilla KD (percentage points)\n";
    render_delta_block(os, doc["delta"]);
  }
  if (doc.contains("sftn_nonref")) {
    const json& nr = doc["sftn_nonref"];
    os << "\nspecialized teachers on non-reference students: mu="
       << fixed(nr.value("mu", 0.0), 2)
       << "  nonpositive cell observed: " << (nr.value("has_nonpositive_cell", false) ? "yes" : "no")
       << "\n";
  }

  if (doc.contains("timing") && doc["timing"].contains("timecost")) {
    const json& tc = doc["timing"]["timecost"];
    os << "\ntime cost\n  generic teacher: " << fixed(tc.value("gtn_seconds", 0.0), 2)
       << static_cast<std::string>("s\n  specialized teacher (mean): ")
       << fixed(tc.value("sftn_mean_seconds", 0.0), 2)
       << "s\n  crossover k* = " << tc.value("crossover_k", 0) << "\n";
  }

  if (doc.contains("memory")) {
    os << "\nmemory sizes (MB = 1e6 bytes; fit checked on 8-bit size)\n";
    os << "  student  params  32b(MB)  8b(MB)  fits\n";
    for (const auto& row : doc["memory"]) {
      os << "  " << row.value("student", "") << "  " << row.value("param_count", 0ll) << "  "
         << fixed(row.value("mb_32bit", 0.0), 1) << "  " << fixed(row.value("mb_8bit", 0.0), 1)
         << "  ";
      for (const auto& f : row["fits"]) os << (f.get<bool>() ? "Y" : "N");
      os << "\n";
    }
  }

  if (doc.contains("nas")) {
    os << "\nsearched students\n";
    const json& nas = doc["nas"];
    const char* names[] = {"nas-l", "nas-m", "nas-s"};
    for (std::size_t i = 0; i < nas["samples"].size() && i < 3; ++i) {
      os << "  " << names[i] << ": layers=" << nas["samples"][i].dump()
         << " params=" << nas["param_counts"][i].get<std::int64_t>() << "\n";
    }
  }

  if (doc.contains("notes")) {
    os << "\nnotes\n";
    for (const auto& n : doc["notes"]) os << "  - " << n.get<std::string>() << "\n";
  }
  return os.str();
}

std::string ExperimentReport::render_timecost_svg() const {
  if (!doc.contains("timing") || !doc["timing"].contains("timecost")) return {};
  const json& tc = doc["timing"]["timecost"];
  const double gtn = tc.value("gtn_seconds", 0.0);
  const double sftn = tc.value("sftn_mean_seconds", 0.0);
  const int kstar = tc.value("crossover_k", 1);
  const int max_students = std::max(6, kstar + 2);
  const double max_y = std::max(gtn, sftn * max_students) * 1.1 + 1e-9;

  const double w = 480, h = 300, ml = 50, mb = 40, mt = 20, mr = 20;
  auto px = [&](double k) { return ml + (w - ml - mr) * (k / max_students); };
  auto py = [&](double y) { return h - mb - (h - mb - mt) * (y / max_y); };

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
     << "' stroke='black'/>\n";
  // specialized: linear in the number of students
  os << "<polyline fill='none' stroke='#1f77b4' stroke-width='2' points='";
  for (int k = 0; k <= max_students; ++k) os << px(k) << "," << py(sftn * k) << " ";
  os << "'/>\n";
  // generic: one-off cost
  os << "<line x1='" << px(0) << "' y1='" << py(gtn) << "' x2='" << px(max_students) << "' y2='"
     << py(gtn) << "' stroke='#d62728' stroke-width='2'/>\n";
  os << "<line x1='" << px(kstar) << "' y1='" << mt << "' x2='" << px(kstar) << "' y2='" << h - mb
     << "' stroke='#d62728' stroke-dasharray='4,3'/>\n";
  os << "<text x='" << px(kstar) + 4 << "' y='" << mt + 12 << "' font-size='12'>k*=" << kstar
     << "</text>\n";
  os << "<text x='" << (w / 2 - 40) << "' y='" << h - 8 << "' font-size='12'># of students</text>\n";
  os << "<text x='8' y='" << (h / 2) << "' font-size='12' transform='rotate(-90 12," << (h / 2)
     << ")'>seconds</text>\n";
  os << "<text x='" << w - 170 << "' y='" << mt + 12
     << "' font-size='12' fill='#1f77b4'>specialized (per student)</text>\n";
  os << "<text x='" << w - 170 << "' y='" << mt + 28
     << "' font-size='12' fill='#d62728'>generic (one-off)</text>\n";
  os << "</svg>\n";
  return os.str();
}

json deterministic_view(const json& report_doc) {
  json copy = report_doc;
  copy.erase("timing");
  return copy;
}

}  // namespace gtn
