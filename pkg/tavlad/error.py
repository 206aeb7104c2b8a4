class TavladError(Exception):
    """Base class of Tavlad Errors"""


class ContractError(TavladError, ValueError):
    """Precondition or dimension violation"""


class ConfigError(TavladError):
    """Config Error"""


class DataIOError(TavladError):
    """File can not be read or written"""


class FormatError(DataIOError):
    """Binary file does not match its format"""

    def __init__(self, path, message, offset):
        self.path = str(path)
        self.message = message
        self.offset = offset
        super().__init__(f'{self.path}: {message} (at byte offset {offset})')

    def __repr__(self):
        return f'<{type(self).__name__} {self.path}@{self.offset}>'


class GradCheckError(TavladError):
    """Loss became non-finite while finite differencing"""

    def __init__(self, name, index, sign):
        self.name = name
        self.index = index
        self.sign = sign
        super().__init__(
            f'non-finite loss when perturbing {name}{list(index)} '
            f'by {sign}eps')


class NonFiniteLossError(TavladError):
    """Training loss became NaN or Inf"""

    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(
            f'non-finite loss {value!r} at epoch {epoch}, batch {batch}')


class DegenerateNormWarning(UserWarning):
    """Vector norm below eps, vector passed through unnormalized"""
