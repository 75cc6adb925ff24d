#pragma once

// Text resources compiled into the library from data/.
namespace mpath::embedded {

extern const char* const kEmoticons;
extern const char* const kStopwords;

}  // namespace mpath::embedded
