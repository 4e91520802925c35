#include "facetts/cli/plots.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "facetts/common/errors.hpp"

namespace facetts::cli {

namespace {

double number_field(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ParseError(std::string("metrics record lacks numeric field ") + key, line);
  }
  return j.at(key).get<double>();
}

struct Column {
  const char* name;
  double (*get)(const training::StepRecord&);
};

const std::vector<Column>& columns() {
  static const std::vector<Column> cols{
      {"L_prior", [](const training::StepRecord& r) { return r.loss.prior; }},
      {"L_dur", [](const training::StepRecord& r) { return r.loss.duration; }},
      {"L_diff", [](const training::StepRecord& r) { return r.loss.diffusion; }},
      {"L_spk", [](const training::StepRecord& r) { return r.loss.speaker; }},
      {"total", [](const training::StepRecord& r) { return r.loss.total; }},
  };
  return cols;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

std::vector<training::StepRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics log " + path.string());
  std::vector<training::StepRecord> records;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed metrics record: ") + e.what(), line);
    }
    if (!j.is_object()) throw ParseError("metrics record is not an object", line);
    if (!j.contains("step") || !j.at("step").is_number_unsigned()) {
      throw ParseError("metrics record lacks an unsigned step", line);
    }
    training::StepRecord r;
    r.step = j.at("step").get<std::size_t>();
    r.loss.prior = number_field(j, "L_prior", line);
    r.loss.duration = number_field(j, "L_dur", line);
    r.loss.diffusion = number_field(j, "L_diff", line);
    r.loss.speaker = number_field(j, "L_spk", line);
    r.loss.gamma = number_field(j, "gamma", line);
    r.loss.total = number_field(j, "total", line);
    const double sum = r.loss.prior + r.loss.duration + r.loss.diffusion + r.loss.gamma * r.loss.speaker;
    if (!(std::abs(sum - r.loss.total) <= kAdditivityTolerance)) {
      throw ParseError("loss components do not sum to the logged total", line);
    }
    records.push_back(r);
  }
  return records;
}

std::vector<std::filesystem::path> export_plots(const std::vector<training::StepRecord>& records,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  for (const auto& col : columns()) {
    const auto path = out_dir / (std::string(col.name) + ".csv");
    auto out = open_csv(path);
    out << "step," << col.name << '\n';
    for (const auto& r : records) out << r.step << ',' << col.get(r) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
    written.push_back(path);
  }

  const auto path = out_dir / "components.csv";
  auto out = open_csv(path);
  out << "step,L_prior,L_dur,L_diff,L_spk,gamma,total\n";
  for (const auto& r : records) {
    out << r.step << ',' << r.loss.prior << ',' << r.loss.duration << ',' << r.loss.diffusion << ','
        << r.loss.speaker << ',' << r.loss.gamma << ',' << r.loss.total << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
  written.push_back(path);
  return written;
}

}  // namespace facetts::cli
