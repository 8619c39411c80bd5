#pragma once

#include <stdexcept>
#include <string>

namespace score {

// Base of everything the library throws on a contract violation.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SCORE_DEFINE_ERROR(Name) \
  class Name : public Error {    \
   public:                       \
    using Error::Error;          \
  }

SCORE_DEFINE_ERROR(FormatError);
SCORE_DEFINE_ERROR(TruncatedError);
SCORE_DEFINE_ERROR(DataError);
SCORE_DEFINE_ERROR(IoError);
SCORE_DEFINE_ERROR(GridError);
SCORE_DEFINE_ERROR(LabelError);
SCORE_DEFINE_ERROR(ScoreError);
SCORE_DEFINE_ERROR(EmptyRegionError);
SCORE_DEFINE_ERROR(DegenerateImageError);
SCORE_DEFINE_ERROR(UndefinedMetric);
SCORE_DEFINE_ERROR(RegionCountError);
SCORE_DEFINE_ERROR(ShapeError);
SCORE_DEFINE_ERROR(CacheError);
SCORE_DEFINE_ERROR(NumericError);
SCORE_DEFINE_ERROR(ConfigError);
SCORE_DEFINE_ERROR(CheckpointError);

#undef SCORE_DEFINE_ERROR

}  // namespace score
