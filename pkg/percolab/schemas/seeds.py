from pydantic import BaseModel, ConfigDict, Field


class SeedSpec(BaseModel):
    """Full provenance of a random stream.

    The (master_seed, replica_index, purpose_tag) triple determines every draw.
    """

    model_config = ConfigDict(frozen=True)

    master_seed: int = Field(..., ge=0, lt=2**64)
    replica_index: int = Field(0, ge=0)
    purpose_tag: str = Field("root", min_length=1, max_length=128)

    def replica(self, index: int) -> "SeedSpec":
        """The stream of replica `index` under the same master seed and tag."""
        return self.model_copy(update={"replica_index": index})

    def child(self, tag: str) -> "SeedSpec":
        """A domain-separated stream for a sub-experiment."""
        return self.model_copy(update={"purpose_tag": f"{self.purpose_tag}/{tag}"})

    def substream(self, index: int) -> "SeedSpec":
        """Numbered substream of this replica (rejection attempts and the like)."""
        return self.model_copy(update={"purpose_tag": f"{self.purpose_tag}#{index}"})

    def label(self) -> str:
        return f"{self.master_seed}:{self.replica_index}:{self.purpose_tag}"
