//! Clean household task plans used as the base of synthetic corpora.

pub struct Template {
    pub task: &'static str,
    pub goal: &'static str,
    pub context: &'static str,
    pub actions: &'static [&'static str],
}

pub const TEMPLATES: [Template; 15] = [
    Template {
        task: "coffee",
        goal: "Make a mug of coffee",
        context: "Commander: Please make me a coffee. The mug is on the counter.",
        actions: &[
            "Driver.Move(2.5)",
            "Driver.PickUp('Mug')",
            "Driver.Turn(90)",
            "Driver.Place('CoffeeMachine')",
            "Driver.ToggleOn('CoffeeMachine')",
            "Driver.ToggleOff('CoffeeMachine')",
            "Driver.PickUp('Mug')",
            "Driver.Place('DiningTable')",
        ],
    },
    Template {
        task: "water-plant",
        goal: "Water the house plant",
        context: "Commander: The plant looks dry, can you water it?",
        actions: &[
            "Driver.PickUp('Cup')",
            "Driver.Move(3)",
            "Driver.Place('Sink')",
            "Driver.ToggleOn('Faucet')",
            "Driver.ToggleOff('Faucet')",
            "Driver.PickUp('Cup')",
            "Driver.Move(4)",
            "Driver.Pour('HousePlant')",
        ],
    },
    Template {
        task: "boil-potato",
        goal: "Boil a potato",
        context: "Commander: Boil the potato in the pot on the stove.",
        actions: &[
            "Driver.PickUp('Pot')",
            "Driver.Place('Sink')",
            "Driver.ToggleOn('Faucet')",
            "Driver.ToggleOff('Faucet')",
            "Driver.PickUp('Pot')",
            "Driver.Place('StoveBurner')",
            "Driver.PickUp('Potato')",
            "Driver.Place('Pot')",
            "Driver.ToggleOn('StoveKnob')",
        ],
    },
    Template {
        task: "toast",
        goal: "Make a slice of toast",
        context: "Commander: I'd like one slice of toast.",
        actions: &[
            "Driver.PickUp('Knife')",
            "Driver.Slice('Bread')",
            "Driver.Place('CounterTop')",
            "Driver.PickUp('BreadSliced')",
            "Driver.Place('Toaster')",
            "Driver.ToggleOn('Toaster')",
            "Driver.ToggleOff('Toaster')",
        ],
    },
    Template {
        task: "sandwich",
        goal: "Make a sandwich",
        context: "Commander: Make a sandwich with toast and lettuce on a plate.",
        actions: &[
            "Driver.PickUp('Knife')",
            "Driver.Slice('Bread')",
            "Driver.Slice('Lettuce')",
            "Driver.Place('CounterTop')",
            "Driver.PickUp('BreadSliced')",
            "Driver.Place('Toaster')",
            "Driver.ToggleOn('Toaster')",
            "Driver.ToggleOff('Toaster')",
            "Driver.PickUp('BreadSliced')",
            "Driver.Place('Plate')",
            "Driver.PickUp('LettuceSliced')",
            "Driver.Place('Plate')",
        ],
    },
    Template {
        task: "bathroom",
        goal: "Clean the bathroom",
        context: "Commander: Clean the sink, the soap is next to the bathtub.",
        actions: &[
            "Driver.PickUp('Soap')",
            "Driver.Move(5)",
            "Driver.Turn(90)",
            "Driver.PickUp('Sponge')",
            "Driver.Place('Sink')",
            "Driver.ToggleOn('Faucet')",
            "Driver.Clean('Sink')",
            "Driver.ToggleOff('Faucet')",
        ],
    },
    Template {
        task: "dishes",
        goal: "Clean all the plates",
        context: "Commander: Rinse the dirty plates in the sink.",
        actions: &[
            "Driver.PickUp('Plate')",
            "Driver.Place('Sink')",
            "Driver.ToggleOn('Faucet')",
            "Driver.ToggleOff('Faucet')",
            "Driver.PickUp('Plate')",
            "Driver.Place('DishRack')",
        ],
    },
    Template {
        task: "table",
        goal: "Set two plates on the dining table",
        context: "Commander: Put both plates on the dining table.",
        actions: &[
            "Driver.Move(3)",
            "Driver.PickUp('Plate')",
            "Driver.Place('DiningTable')",
            "Driver.Turn(180)",
            "Driver.PickUp('Plate')",
            "Driver.Place('DiningTable')",
        ],
    },
    Template {
        task: "salad",
        goal: "Make a salad",
        context: "Commander: Slice a tomato and some lettuce into a bowl.",
        actions: &[
            "Driver.PickUp('Knife')",
            "Driver.Slice('Tomato')",
            "Driver.Slice('Lettuce')",
            "Driver.Place('CounterTop')",
            "Driver.PickUp('TomatoSliced')",
            "Driver.Place('Bowl')",
            "Driver.PickUp('LettuceSliced')",
            "Driver.Place('Bowl')",
        ],
    },
    Template {
        task: "cook-potato",
        goal: "Cook a slice of potato",
        context: "Commander: Slice the potato and cook one slice in the microwave.",
        actions: &[
            "Driver.PickUp('Knife')",
            "Driver.Slice('Potato')",
            "Driver.Place('CounterTop')",
            "Driver.PickUp('PotatoSliced')",
            "Driver.Open('Microwave')",
            "Driver.Place('Microwave')",
            "Driver.Close('Microwave')",
            "Driver.ToggleOn('Microwave')",
            "Driver.ToggleOff('Microwave')",
        ],
    },
    Template {
        task: "heat-mug",
        goal: "Heat a mug of water",
        context: "Commander: Warm up the water in the mug using the microwave.",
        actions: &[
            "Driver.PickUp('Mug')",
            "Driver.Open('Microwave')",
            "Driver.Place('Microwave')",
            "Driver.Close('Microwave')",
            "Driver.ToggleOn('Microwave')",
            "Driver.ToggleOff('Microwave')",
            "Driver.Open('Microwave')",
        ],
    },
    Template {
        task: "remotes",
        goal: "Put the remote control on the sofa",
        context: "Commander: The remote is on the TV stand, put it on the sofa.",
        actions: &[
            "Driver.Move(4)",
            "Driver.PickUp('RemoteControl')",
            "Driver.Turn(90)",
            "Driver.Move(2)",
            "Driver.Place('Sofa')",
        ],
    },
    Template {
        task: "lights",
        goal: "Turn on the floor lamp",
        context: "Commander: It's dark in here, switch on the floor lamp.",
        actions: &["Driver.Move(3)", "Driver.Turn(270)", "Driver.Move(1.5)", "Driver.ToggleOn('FloorLamp')"],
    },
    Template {
        task: "fridge",
        goal: "Put the apple in the fridge",
        context: "Commander: Store the apple from the counter in the fridge.",
        actions: &[
            "Driver.PickUp('Apple')",
            "Driver.Move(2)",
            "Driver.Open('Fridge')",
            "Driver.Place('Fridge')",
            "Driver.Close('Fridge')",
        ],
    },
    Template {
        task: "breakfast",
        goal: "Prepare breakfast",
        context: "Commander: Make coffee and put an apple slice on a plate.",
        actions: &[
            "Driver.PickUp('Mug')",
            "Driver.Place('CoffeeMachine')",
            "Driver.ToggleOn('CoffeeMachine')",
            "Driver.ToggleOff('CoffeeMachine')",
            "Driver.PickUp('Knife')",
            "Driver.Slice('Apple')",
            "Driver.Place('CounterTop')",
            "Driver.PickUp('AppleSliced')",
            "Driver.Place('Plate')",
        ],
    },
];
