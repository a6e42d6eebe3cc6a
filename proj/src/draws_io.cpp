#include <fstream>
#include <sstream>

#include "bstack/dataset.hpp"
#include "bstack/error.hpp"
#include "bstack/sampler.hpp"

namespace bstack {

std::string draws_to_csv(const PosteriorDraws& draws) {
  std::string out = "chain,iteration";
  for (const auto& label : draws.labels) out += "," + csv_escape(label);
  out += '\n';
  const Eigen::Index per = draws.per_chain();
  for (Eigen::Index s = 0; s < draws.size(); ++s) {
    out += std::to_string(draws.chain[static_cast<std::size_t>(s)] + 1);
    out += ',';
    out += std::to_string(per ? s % per + 1 : s + 1);
    for (Eigen::Index j = 0; j < draws.dim(); ++j) {
      out += ',';
      out += format_double(draws.draws(s, j));
    }
    out += '\n';
  }
  return out;
}

void write_draws_csv(const PosteriorDraws& draws, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << draws_to_csv(draws);
}

PosteriorDraws read_draws_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing draw store '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto records = parse_csv_records(ss.str());
  if (records.empty() || records.front().size() < 3 || records.front()[0] != "chain")
    throw ConfigError("draw store '" + path.string() + "' has no chain/iteration header");
  const auto& header = records.front();

  PosteriorDraws out;
  out.labels.assign(header.begin() + 2, header.end());
  const auto rows = static_cast<Eigen::Index>(records.size() - 1);
  const auto dim = static_cast<Eigen::Index>(out.labels.size());
  out.draws.resize(rows, dim);
  int max_chain = 0;
  for (Eigen::Index s = 0; s < rows; ++s) {
    const auto& rec = records[static_cast<std::size_t>(s + 1)];
    if (static_cast<Eigen::Index>(rec.size()) != dim + 2)
      throw ConfigError("draw store '" + path.string() + "': ragged row " + std::to_string(s + 1));
    const int chain = std::stoi(rec[0]) - 1;
    out.chain.push_back(chain);
    max_chain = std::max(max_chain, chain);
    for (Eigen::Index j = 0; j < dim; ++j) out.draws(s, j) = std::stod(rec[static_cast<std::size_t>(j + 2)]);
  }
  const int chains = rows ? max_chain + 1 : 0;
  out.step_size.assign(static_cast<std::size_t>(chains), 0.0);
  out.divergences.assign(static_cast<std::size_t>(chains), 0);
  out.saturated.assign(static_cast<std::size_t>(chains), 0);
  out.mean_accept.assign(static_cast<std::size_t>(chains), 0.0);
  out.inv_metric = Eigen::MatrixXd::Ones(chains, dim);
  out.config.chains = std::max(chains, 1);
  out.config.draws = chains ? static_cast<int>(rows / chains) : 0;
  return out;
}

}  // namespace bstack
