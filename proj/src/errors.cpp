#include "survrisk/errors.hpp"

namespace survrisk {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return 2;
    case ErrorKind::Data:
      return 3;
    case ErrorKind::Numeric:
      return 4;
  }
  return 1;
}

}  // namespace survrisk
