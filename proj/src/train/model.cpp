#include "keyvec/model.hpp"

#include <fstream>
#include <sstream>

namespace keyvec {

void ModelConfig::validate() const {
  if (vocab_size < 2) throw InvalidConfig("vocab_size must cover at least PAD and UNK");
  if (word_dim < 1 || filters_per_width < 1 || lstm_hidden < 1 || doc_dim < 1) {
    throw InvalidConfig("model dimensions must be >= 1");
  }
  if (filter_widths.empty()) throw InvalidConfig("at least one filter width is required");
  for (std::size_t i = 0; i < filter_widths.size(); ++i) {
    if (filter_widths[i] < 1) throw InvalidConfig("filter widths must be >= 1");
    if (i > 0 && filter_widths[i] <= filter_widths[i - 1]) {
      throw InvalidConfig("filter widths must be strictly ascending");
    }
  }
}

template <typename T>
std::size_t load_pretrained_embeddings(Model<T>& model, const Vocabulary& vocab, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embedding file " + path);
  std::size_t rows = 0, dim = 0;
  std::string header;
  if (!std::getline(in, header) || !(std::istringstream(header) >> rows >> dim)) {
    throw ParseError(path + ": expected a 'V E' header line");
  }
  if (dim != model.config.word_dim) {
    throw ShapeMismatch(path + ": vectors have " + std::to_string(dim) + " dimensions, model uses " +
                        std::to_string(model.config.word_dim));
  }
  auto& table = model.params.get(param_names::kEmbedding).value;
  std::size_t replaced = 0;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (values.size() != dim) throw ParseError(path + " line " + std::to_string(lineno) + ": wrong vector length");
    if (!vocab.contains(word)) continue;
    const auto id = static_cast<std::size_t>(vocab.id(word));
    if (id == static_cast<std::size_t>(Vocabulary::kPad) || id == static_cast<std::size_t>(Vocabulary::kUnk)) continue;
    for (std::size_t k = 0; k < dim; ++k) table.at(id, k) = static_cast<T>(values[k]);
    ++replaced;
  }
  return replaced;
}

template std::size_t load_pretrained_embeddings<float>(Model<float>&, const Vocabulary&, const std::string&);
template std::size_t load_pretrained_embeddings<double>(Model<double>&, const Vocabulary&, const std::string&);

}  // namespace keyvec
