#ifndef PATCHFORGE_ERRORS_HPP_
#define PATCHFORGE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace patchforge {

// Root of every error raised by the library. Callers that only need to
// distinguish "library failure" from anything else can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PatchTooLarge : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class InvalidSpec : public Error { public: using Error::Error; };
class ShapeMismatch : public Error { public: using Error::Error; };
class EmptyBatch : public Error { public: using Error::Error; };
class EmptyDataset : public Error { public: using Error::Error; };
class DuplicateName : public Error { public: using Error::Error; };
class UnknownModel : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class DivergenceError : public Error { public: using Error::Error; };
class NonFiniteLoss : public Error { public: using Error::Error; };
class NonFiniteGradient : public Error { public: using Error::Error; };
class MissingPair : public Error { public: using Error::Error; };
class LayoutError : public Error { public: using Error::Error; };
class NoDefinedClasses : public Error { public: using Error::Error; };
class MissingArtifacts : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

}  // namespace patchforge

#endif  // PATCHFORGE_ERRORS_HPP_
