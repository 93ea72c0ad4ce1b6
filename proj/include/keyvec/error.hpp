#ifndef KEYVEC_ERROR_HPP
#define KEYVEC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace keyvec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KEYVEC_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

// corpus
KEYVEC_DEFINE_ERROR(EmptyDocument);
KEYVEC_DEFINE_ERROR(ParseError);
// supervision
KEYVEC_DEFINE_ERROR(MissingSummary);
// nn
KEYVEC_DEFINE_ERROR(IndexOutOfRange);
KEYVEC_DEFINE_ERROR(ShapeMismatch);
KEYVEC_DEFINE_ERROR(NotScalar);
// encoder / train
KEYVEC_DEFINE_ERROR(EmptyKeywordSet);
KEYVEC_DEFINE_ERROR(EmptyTrainingSet);
KEYVEC_DEFINE_ERROR(InvalidConfig);
// checkpoint
KEYVEC_DEFINE_ERROR(IoError);
KEYVEC_DEFINE_ERROR(FormatVersionMismatch);
KEYVEC_DEFINE_ERROR(CorruptFile);
// eval
KEYVEC_DEFINE_ERROR(DimMismatch);
KEYVEC_DEFINE_ERROR(EmptyIndex);
KEYVEC_DEFINE_ERROR(QueryWithoutRelevants);
KEYVEC_DEFINE_ERROR(TooFewPoints);
KEYVEC_DEFINE_ERROR(LabelMismatch);

#undef KEYVEC_DEFINE_ERROR

}  // namespace keyvec

#endif  // KEYVEC_ERROR_HPP
