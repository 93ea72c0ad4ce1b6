#include "keyvec/train.hpp"

#include <cstdio>
#include <fstream>

namespace keyvec {

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be > 0");
  if (!(lr_decay > 0.0)) throw InvalidConfig("lr_decay must be > 0");
  if (!(clip_norm > 0.0)) throw InvalidConfig("clip_norm must be > 0");
  if (!(lambda_read >= 0.0) || !(lambda_enc >= 0.0)) throw InvalidConfig("loss weights must be >= 0");
}

void write_training_log(const std::string& path, std::span<const EpochLog> log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log " + path);
  out << "epoch,reader_loss,enc_loss,salience_acc,keyword_recall\n";
  char buf[256];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", row.epoch, row.reader_loss, row.enc_loss,
                  row.salience_acc, row.keyword_recall);
    out << buf;
  }
}

}  // namespace keyvec
