"""Errors raised by the aegisnet protocol library and simulator."""


class AegisnetError(Exception):
    def __init__(self, msg=None):
        msg = msg if msg else self.__class__.__name__
        super(AegisnetError, self).__init__(msg)
        self.message = msg

    @property
    def reason(self) -> str:
        """Reject reason recorded in traces and transcript verdicts"""
        return self.__class__.__name__


class ConfigInvalid(AegisnetError):
    pass


class InsufficientNodes(AegisnetError):
    pass


class UnreachableNode(AegisnetError):
    def __init__(self, node_ids, msg=None):
        self.node_ids = sorted(node_ids)
        msg = msg if msg else f"No path to any cluster head for nodes {self.node_ids}"
        super(UnreachableNode, self).__init__(msg)


class PointNotOnCurve(AegisnetError, ValueError):
    pass


class EpochOutOfWindow(AegisnetError):
    def __init__(self, msg=None, ahead: bool = False):
        super(EpochOutOfWindow, self).__init__(msg)
        # True when the observed epoch ran past the window rather than behind it
        self.ahead = ahead


class LinkFlagged(AegisnetError):
    pass


class TagInvalid(AegisnetError):
    pass


class DuplicateIdentity(AegisnetError):
    pass


class UnknownIdentity(AegisnetError):
    pass


class RegistrationRevoked(AegisnetError):
    pass


class StaleTimestamp(AegisnetError):
    pass


class ReplayDetected(AegisnetError):
    pass


class UnknownSession(AegisnetError):
    pass


class MessageDropped(AegisnetError):
    pass
