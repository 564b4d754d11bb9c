from .base import Arbitration, EnvView, NCAPolicy, StancePolicy
from .heuristic import HeuristicNCA, HeuristicSIB, HeuristicTSU, HeuristicWeights, SibProposer, TsuAdopter
from .remote import BackendError, RemoteBackendConfig, RemotePolicy
from .scripted import ScriptedNCA, ScriptedSIB, ScriptedTSU

__all__ = [
    "Arbitration", "EnvView", "NCAPolicy", "StancePolicy",
    "HeuristicNCA", "HeuristicSIB", "HeuristicTSU", "HeuristicWeights", "SibProposer", "TsuAdopter",
    "BackendError", "RemoteBackendConfig", "RemotePolicy",
    "ScriptedNCA", "ScriptedSIB", "ScriptedTSU",
]
