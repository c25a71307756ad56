from pydantic import BaseModel, ConfigDict


class DataClassModel(BaseModel):
    """Base class for all models in this module."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def to_dict(self):
        """Convert the model to a JSON-compatible dictionary.

        Array-valued fields are declared with ``exclude=True`` and never reach
        the dictionary; floats keep their shortest round-trip representation.
        """
        return self.model_dump(mode="json")
