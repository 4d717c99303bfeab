#include "singtrace/diffusion/conditions.h"

#include "singtrace/error.h"

namespace singtrace::diffusion {

void ConditionSet::validate() const {
  if (content.cols() != kContentDim || melody.cols() != kMelodyDim) {
    throw InvalidArgument("conditions: wrong stream widths");
  }
  if (content.rows() != melody.rows()) {
    throw InvalidArgument("conditions: content and melody frame counts differ");
  }
  if (excitation.cols() > 0 && excitation.rows() != content.rows()) {
    throw InvalidArgument("conditions: excitation frame count differs");
  }
}

ConditionSet ConditionSet::crop(int first_frame, int frames) const {
  if (first_frame < 0 || frames < 1 || first_frame + frames > this->frames()) {
    throw InvalidArgument("conditions: crop outside the utterance");
  }
  ConditionSet out;
  out.content = content.middleRows(first_frame, frames);
  out.melody = melody.middleRows(first_frame, frames);
  if (excitation.cols() > 0) out.excitation = excitation.middleRows(first_frame, frames);
  out.speaker = speaker;
  return out;
}

}  // namespace singtrace::diffusion
